#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "fellkit.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        FellkitStatus s_ = (call);                                           \
        if (s_ != FELLKIT_STATUS_OK) {                                       \
            fprintf(stderr, "%s -> %d: %s\n", #call, (int)s_,                \
                    fellkit_last_error_message());                           \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    size_t dims[3] = {2, 1, 3};
    FellkitModel *m = NULL;
    CHECK(fellkit_model_imprimitivity(dims, 3, &m));

    bool passed = false;
    double residual = -1.0;
    CHECK(fellkit_check_axioms(m, 50, 1, 0.0, &passed, &residual));
    size_t kernel = 0;
    CHECK(fellkit_kernel_dimension(m, &kernel));
    printf("axioms %d residual %.3e kernel %zu\n", passed, residual, kernel);
    if (!passed || kernel != 22) return 2;
    fellkit_model_free(m);

    FellkitModel *four = NULL;
    CHECK(fellkit_model_preset("fourpoint", 0, 0, 0, &four));
    FellkitPhi *phi = NULL;
    CHECK(fellkit_phi_from_model(four, &phi));
    size_t n = 0;
    CHECK(fellkit_phi_dim(phi, &n));
    double *buf = calloc(2 * n * n, sizeof(double));
    CHECK(fellkit_phi_copy_matrix(phi, buf, 2 * n * n));
    for (size_t k = 0; k < n * n; k++) {
        if (buf[2 * k] != 1.0 || buf[2 * k + 1] != 0.0) return 3;
    }
    free(buf);
    FellkitPairClass cls;
    CHECK(fellkit_phi_readoff_class(phi, 0.0, &cls));
    if (cls != FELLKIT_PAIR_CLASS_DIAGONAL) return 4;
    fellkit_phi_free(phi);
    fellkit_model_free(four);

    FellkitModel *bad = NULL;
    if (fellkit_model_from_json("{\"points\": 2}", 0.0, &bad) != FELLKIT_STATUS_PARSE_ERROR) return 5;
    if (fellkit_last_error_message() == NULL) return 6;

    printf("ok %s\n", fellkit_version());
    return 0;
}
