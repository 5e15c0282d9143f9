/* Simulate a change at n = 120 and run the truncated detector over it.
 *
 *   cargo build --release -p scorecusum-ffi
 *   cc crates/ffi/examples/detect.c -Icrates/ffi/include \
 *      target/release/libscorecusum_ffi.a -lm -lpthread -ldl -o detect
 */
#include <stdio.h>
#include <stdlib.h>

#include "scorecusum.h"

static int check(ScStatus st) {
    if (st != SC_STATUS_OK) {
        char *msg = sc_last_error_message();
        fprintf(stderr, "error %d: %s\n", (int)st, msg ? msg : "?");
        sc_string_free(msg);
        exit(st);
    }
    return 0;
}

int main(void) {
    const size_t dim = 10, len = 400;
    ScKernelSpec pre = {dim, 0.3, 0.3, 0.2};
    ScKernelSpec post = {dim, 0.6, 0.5, 0.9};
    double *path = malloc(sizeof(double) * dim * len);
    double *diffs = malloc(sizeof(double) * (len - 1));
    ScField *p = NULL, *q = NULL;
    ScDetector *det = NULL;

    check(sc_simulate_path(&pre, &post, 120, len, 1000, 42, path, dim * len));
    check(sc_field_gaussian(pre, &p));
    check(sc_field_gaussian(post, &q));
    check(sc_score_differences(p, q, path, len, dim, diffs));
    check(sc_detector_new(2000.0, true, 600.0, &det));
    for (size_t n = 0; n + 1 < len; n++) {
        bool alarmed = false;
        check(sc_detector_update(det, diffs[n], &alarmed));
        if (alarmed) {
            printf("alarm at n = %zu\n", n + 1);
            break;
        }
    }
    sc_detector_free(det);
    sc_field_free(p);
    sc_field_free(q);
    free(path);
    free(diffs);
    return 0;
}
