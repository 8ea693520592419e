#include "crplan.h"
#include <stdio.h>

int main(void) {
    CrpScenario *scenario = NULL;
    CrpReport *report = NULL;
    if (crp_scenario_load("scenarios/fixed_circle.scenario", &scenario) != CRP_STATUS_OK) {
        fprintf(stderr, "load: %s\n", crp_last_error_message());
        return 1;
    }
    if (crp_scenario_run(scenario, &report) != CRP_STATUS_OK) {
        fprintf(stderr, "run: %s\n", crp_last_error_message());
        return 1;
    }
    size_t n = 0;
    double clearance = 0.0;
    crp_report_step_count(report, &n);
    crp_report_min_clearance(report, &clearance);
    printf("version=%s steps=%zu min_clearance=%.3f\n", crp_version(), n, clearance);
    crp_report_free(report);
    crp_scenario_free(scenario);
    return 0;
}
