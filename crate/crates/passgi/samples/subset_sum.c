/* Subset sum by backtracking: counts subsets of a fixed weight set that hit
 * each target in a range. Deterministic output, roughly a fraction of a
 * second at -O0. */
#include <stdio.h>
#include <stdlib.h>

#define N 24

static const int weights[N] = {
    3, 34, 4, 12, 5, 2, 27, 18, 9, 41, 7, 15,
    22, 6, 31, 11, 8, 19, 25, 13, 16, 29, 10, 21,
};

static long solutions;

static void search(int index, int remaining, int suffix_sum) {
    if (remaining == 0) {
        solutions++;
        return;
    }
    if (index == N || remaining < 0 || suffix_sum < remaining) {
        return;
    }
    int w = weights[index];
    search(index + 1, remaining - w, suffix_sum - w);
    search(index + 1, remaining, suffix_sum - w);
}

int main(int argc, char **argv) {
    int lo = argc > 1 ? atoi(argv[1]) : 100;
    int hi = argc > 2 ? atoi(argv[2]) : 112;
    int total = 0;
    for (int i = 0; i < N; i++) {
        total += weights[i];
    }
    long checksum = 0;
    for (int target = lo; target <= hi; target++) {
        solutions = 0;
        search(0, target, total);
        checksum = checksum * 31 + solutions;
    }
    printf("targets %d..%d checksum %ld\n", lo, hi, checksum);
    return 0;
}
