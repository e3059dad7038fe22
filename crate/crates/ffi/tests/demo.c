#include <stdio.h>
#include <stdlib.h>

#include "convseq.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        ConvseqStatus st_ = (call);                                          \
        if (st_ != CONVSEQ_STATUS_OK) {                                      \
            fprintf(stderr, "%s: %d %s\n", #call, st_, convseq_last_error()); \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    enum { N = 60, T = 6000, M = 100, CAP = 2000 };
    static size_t neurons[CAP], bins[CAP];
    size_t nnz = 0;
    srand(1);
    for (size_t c = 150; c < T; c += 300) {
        for (size_t n = 0; n < 30; n++) {
            neurons[nnz] = n;
            bins[nnz] = c + 2 * n + (size_t)(rand() % 11) - 5;
            nnz++;
        }
    }
    while (nnz < CAP) {
        neurons[nnz] = (size_t)rand() % N;
        bins[nnz] = (size_t)rand() % T;
        nnz++;
    }

    ConvseqSpikes *x = NULL;
    ConvseqBank *bank = NULL;
    ConvseqFit *fit = NULL;
    CHECK(convseq_spikes_new(N, T, neurons, bins, nnz, &x));
    CHECK(convseq_bank_init_direct(N, M, 1, 7, &bank));

    ConvseqFitConfig cfg = convseq_fit_config_default();
    CHECK(convseq_fit(x, bank, &cfg, &fit));
    ConvseqNullCalibration cal;
    CHECK(convseq_calibrate_null(x, bank, 200, 4.0, 1, &cal));

    double *trace = malloc(sizeof(double) * T);
    CHECK(convseq_fit_trace(fit, 0, trace, T));
    size_t found = 0, peaks[32];
    CHECK(convseq_extract_detections(trace, T, cal.alpha, M, peaks, 32, &found));

    ConvseqStatus bad = convseq_fit_trace(fit, 5, trace, T);
    if (bad != CONVSEQ_STATUS_OUT_OF_RANGE || convseq_last_error() == NULL) {
        fprintf(stderr, "expected out-of-range\n");
        return 1;
    }

    printf("version %s, %zu peaks\n", convseq_version(), found);
    free(trace);
    convseq_fit_free(fit);
    convseq_bank_free(bank);
    convseq_spikes_free(x);
    if (found < 10) {
        return 1;
    }
    printf("ok\n");
    return 0;
}
