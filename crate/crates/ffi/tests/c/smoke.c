#include <math.h>
#include <stdio.h>
#include "qdsim.h"

int main(void) {
    double h[1] = {0.25};
    double re[2] = {1.0, 0.0}, im[2] = {0.0, 0.0}, p[2];
    /* Half a Rabi period moves the electron across. */
    if (qdsim_tb_evolve(2, h, re, im, 1.0, p) != QDSIM_STATUS_OK) return 1;
    if (fabs(p[1] - 1.0) > 1e-9) return 2;

    QdsimScenario *s = NULL;
    if (qdsim_scenario_from_json("{\"schema_version\": 2}", NULL, &s) != QDSIM_STATUS_OK) return 3;
    QdsimRun *r = NULL;
    if (qdsim_scenario_run(s, &r) != QDSIM_STATUS_VALIDATION) return 4;
    char msg[256];
    qdsim_last_error(msg, sizeof msg);
    qdsim_scenario_free(s);
    printf("%s %s\n", qdsim_version(), msg);
    return 0;
}
