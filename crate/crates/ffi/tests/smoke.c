#include <math.h>
#include <stdio.h>
#include <string.h>

#include "wisense.h"

static int check(int ok, const char *what) {
    if (!ok) {
        printf("FAIL %s\n", what);
    }
    return ok ? 0 : 1;
}

int main(void) {
    int failures = 0;
    double rad = 0.0;
    failures += check(ws_phase_sensitivity(0.02, 299792458.0 / 5.8e9, &rad) == WS_STATUS_OK, "sensitivity status");
    failures += check(fabs(rad - 2.4312) < 1e-3, "sensitivity value");

    failures += check(ws_phase_sensitivity(0.02, 0.05, NULL) == WS_STATUS_NULL_POINTER, "null status");
    char msg[128];
    failures += check(ws_last_error_message(msg, sizeof msg) > 1 && strstr(msg, "null") != NULL, "error message");

    double intensities[4] = {0.1, 0.5, 0.9, 0.1};
    WsActivitySummary s;
    failures += check(ws_summarize(intensities, 4, 60.0, 0.4, 0.7, &s) == WS_STATUS_OK, "summarize status");
    failures += check(fabs(s.total_min - 4.0) < 1e-12 && fabs(s.vigorous_min - 1.0) < 1e-12, "summarize minutes");

    WsCafConfig cfg = ws_caf_config_default();
    failures += check(cfg.batch_len_s == 0.5 && cfg.max_doppler_hz == 60.0, "caf defaults");
    failures += check(strcmp(ws_gesture_code(4), "g5") == 0, "gesture code");
    return failures == 0 ? 0 : 1;
}
