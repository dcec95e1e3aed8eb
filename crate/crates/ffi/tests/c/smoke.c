#include <stdio.h>
#include <stdlib.h>
#include "cylscale.h"

#define CHECK(call)                                                   \
    do {                                                              \
        enum CsStatus s_ = (call);                                    \
        if (s_ != CS_STATUS_OK) {                                     \
            fprintf(stderr, "%s: %d %s\n", #call, s_, cs_last_error()); \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    struct CsProblem *p = NULL;
    CHECK(cs_problem_new(CS_PROBLEM_KIND_QUADRATIC, 6, 8, 10, -1, &p));
    size_t n = cs_problem_dim(p);
    double *x = calloc(n, sizeof(double));
    double f = 0.0;
    CHECK(cs_problem_eval(p, x, n, &f, NULL));

    struct CsSolveOptions opts = cs_solve_options_default();
    opts.scaled = true;
    struct CsResult *r = NULL;
    CHECK(cs_solve(p, &opts, &r));
    struct CsSummary sum;
    CHECK(cs_result_summary(r, &sum));
    CHECK(cs_result_x(r, x, n));
    for (size_t i = 0; i < n; i++) {
        if (x[i] < 0.0) return 3;
    }
    if (cs_result_x(r, x, n + 1) != CS_STATUS_DIMENSION) return 4;
    printf("n=%zu state=%d iterations=%zu pg_ratio=%g\n", n, (int)sum.state, sum.iterations, sum.pg_ratio);

    cs_result_free(r);
    cs_problem_free(p);
    free(x);
    return sum.state == CS_SOLVE_STATE_CONVERGED ? 0 : 2;
}
