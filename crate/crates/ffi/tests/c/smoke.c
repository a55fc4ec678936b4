#include <math.h>
#include <stdio.h>

#include "nsbox.h"

int main(void) {
    NsBehavior *b = NULL;
    if (ns_behavior_named("box45", 3, 0.0, &b) != NS_STATUS_OK) return 1;
    NsReport r;
    if (ns_evaluate(b, "ic-multi", 1, 0.0, &r) != NS_STATUS_OK) return 2;
    if (fabs(r.lhs - 4.0) > 1e-12 || !r.violated) return 3;
    if (ns_evaluate(b, "no-such", 1, 0.0, &r) == NS_STATUS_OK) return 4;
    if (ns_last_error_message() == NULL) return 5;
    ns_behavior_free(b);
    printf("ok\n");
    return 0;
}
