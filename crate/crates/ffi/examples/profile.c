/* Frequency profile of Re z^2 through the C interface.
 *
 *   cargo build -p robin-ucp-ffi
 *   cc -std=c99 -Icrates/ffi/include crates/ffi/examples/profile.c \
 *      -Ltarget/debug -lrobin_ucp_ffi -o profile
 *   LD_LIBRARY_PATH=target/debug ./profile
 */
#include <stdio.h>

#include "robin_ucp.h"

int main(void) {
    const double k = 2.0;
    const double radii[] = {0.25, 0.5, 0.75, 1.0};
    struct RucpSolution *sol = NULL;
    struct RucpProfile *profile = NULL;

    if (rucp_solution_analytic("homogeneous", &k, 1, &sol) != RUCP_STATUS_OK) {
        fprintf(stderr, "solution: %s\n", rucp_last_error());
        return 1;
    }
    if (rucp_profile_build(sol, 1.0, radii, 4, &profile) != RUCP_STATUS_OK) {
        fprintf(stderr, "profile: %s\n", rucp_last_error());
        rucp_solution_free(sol);
        return 1;
    }
    printf("robin-ucp %s\n", rucp_version());
    for (size_t i = 0; i < rucp_profile_len(profile); i++) {
        struct RucpProfileRow row;
        rucp_profile_row(profile, i, &row);
        printf("r = %.2f  H = %.6e  N = %.12f\n", row.r, row.h, row.n);
    }
    rucp_profile_free(profile);
    rucp_solution_free(sol);
    return 0;
}
