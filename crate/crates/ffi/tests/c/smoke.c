#include <math.h>
#include <stdio.h>
#include "magws.h"

int main(void) {
    MagwsElement *pi0 = NULL;
    MagwsElement *sq = NULL;
    double re = 0.0, im = 0.0;
    if (magws_element_landau_projection(0, 2, 1.0, &pi0) != MAGWS_STATUS_OK) return 1;
    if (magws_element_multiply(pi0, pi0, &sq) != MAGWS_STATUS_OK) return 2;
    if (magws_element_trace(sq, &re, &im) != MAGWS_STATUS_OK) return 3;
    if (fabs(re - 1.0) > 1e-15 || fabs(im) > 1e-15) return 4;
    if (magws_element_upsilon(0, 0, 0, -1.0, &sq) != MAGWS_STATUS_INVALID_PARAMETER) return 5;
    if (magws_last_error()[0] == '\0') return 6;
    magws_element_free(sq);
    magws_element_free(pi0);
    printf("ok %s\n", magws_version());
    return 0;
}
