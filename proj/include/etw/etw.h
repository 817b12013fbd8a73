#ifndef ETW_H
#define ETW_H

/* C interface to the wrist-worn electro-tactile toolkit.
 *
 * Every call returns an etw_status. On failure a message for the calling
 * thread is available from etw_last_error() until the next failing call.
 * Strings returned through char** are owned by the caller: release them
 * with etw_string_free(). Handles are released with their *_free function;
 * passing NULL to a *_free function is a no-op. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define ETW_API __declspec(dllexport)
#else
#define ETW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum etw_status {
    ETW_OK = 0,
    ETW_E_RANGE = 1,
    ETW_E_RESOLUTION = 2,
    ETW_E_ARGUMENT = 3,
    ETW_E_IO = 4,
    ETW_E_PARSE = 5,
    ETW_E_CHECKSUM = 6,
    ETW_E_UNKNOWN_OPCODE = 7,
    ETW_E_LENGTH_OVERRUN = 8,
    ETW_E_BAD_PAYLOAD = 9,
    ETW_E_ENCODE = 10,
    ETW_E_STATE = 11,
    ETW_E_UNCALIBRATED = 12,
    ETW_E_CALIBRATION_FAILED = 13,
    ETW_E_LOCKOUT = 14,
    ETW_E_DESIGN = 15,
    ETW_E_DEGENERATE_VARIANCE = 16,
    ETW_E_TOO_FEW_DIFFERENCES = 17,
    ETW_E_EMPTY_MASK = 18,
    ETW_E_DIMENSION_MISMATCH = 19,
    ETW_E_UNDEFINED_LOAD = 20,
    ETW_E_UNKNOWN_CHANNEL = 21,
    ETW_E_BUSY = 22,
    ETW_E_ABORTED = 23,
    ETW_E_NULL = 98,
    ETW_E_INTERNAL = 99
} etw_status;

ETW_API const char* etw_version(void);
ETW_API const char* etw_status_name(etw_status status);
ETW_API const char* etw_last_error(void);
ETW_API void etw_string_free(char* s);

/* ---- waveforms ---------------------------------------------------------- */

typedef struct etw_waveform etw_waveform;

/* Charge-balanced stimulus: priming phase at amp * width / priming_width, then the stimulation phase. */
ETW_API etw_status etw_waveform_balanced(double amp_ma, double width_ms, double priming_ms, double sample_rate_hz,
                                         int anodic, etw_waveform** out);
ETW_API etw_status etw_waveform_monophasic(double amp_ma, double width_ms, double sample_rate_hz, etw_waveform** out);
ETW_API void etw_waveform_free(etw_waveform* w);

ETW_API size_t etw_waveform_sample_count(const etw_waveform* w);
ETW_API double etw_waveform_sample_rate(const etw_waveform* w);
ETW_API const double* etw_waveform_samples(const etw_waveform* w);
/* Net charge in microcoulombs. */
ETW_API etw_status etw_waveform_net_charge(const etw_waveform* w, double* out_uc);

ETW_API etw_status etw_waveform_write_csv(const etw_waveform* w, const char* path);
/* Shared-axis step plot of n waveforms. */
ETW_API etw_status etw_waveform_write_svg(const etw_waveform* const* ws, const char* const* labels, size_t n,
                                          const char* title, const char* path);

/* ---- hand map and perceiver --------------------------------------------- */

typedef struct etw_handmap etw_handmap;
typedef struct etw_perceiver etw_perceiver;

/* path == NULL loads the bundled map. */
ETW_API etw_status etw_handmap_load(const char* path, etw_handmap** out);
ETW_API void etw_handmap_free(etw_handmap* m);
ETW_API int etw_handmap_width(const etw_handmap* m);
ETW_API int etw_handmap_height(const etw_handmap* m);
ETW_API etw_status etw_handmap_write(const etw_handmap* m, const char* path);
/* Region-coloured drawing of the map. */
ETW_API etw_status etw_handmap_write_svg(const etw_handmap* m, const char* path);

/* path == NULL gives the default perceiver configuration. */
ETW_API etw_status etw_perceiver_load(const char* path, const etw_handmap* map, etw_perceiver** out);
ETW_API void etw_perceiver_free(etw_perceiver* p);
ETW_API etw_status etw_perceiver_write(const etw_perceiver* p, const char* path);

/* ---- simulated device --------------------------------------------------- */

typedef struct etw_device etw_device;

ETW_API etw_status etw_device_create(uint64_t seed, etw_device** out);
ETW_API void etw_device_free(etw_device* d);
/* Feeds wire bytes; reply frames are copied to out (up to cap bytes). *out_len
 * receives the full reply length; ETW_E_RANGE when it exceeds cap. */
ETW_API etw_status etw_device_receive(etw_device* d, const uint8_t* in, size_t n, uint8_t* out, size_t cap,
                                      size_t* out_len);
ETW_API etw_status etw_device_step(etw_device* d, double ms);
ETW_API etw_status etw_device_run_until_idle(etw_device* d);
/* {"state", "t_ms", "channel", "intensity_ua", "resistance_kohm", "playing", "relay_frame", "played", "decode_errors"} */
ETW_API etw_status etw_device_status_json(const etw_device* d, char** out);

/* ---- study protocols ---------------------------------------------------- */

typedef struct etw_study_config etw_study_config;

ETW_API etw_status etw_study_config_create(etw_study_config** out);
ETW_API void etw_study_config_free(etw_study_config* c);
ETW_API etw_status etw_study_config_set_seed(etw_study_config* c, uint64_t seed);
ETW_API etw_status etw_study_config_set_participants(etw_study_config* c, int n);
/* "electro" | "vibro" */
ETW_API etw_status etw_study_config_set_policy(etw_study_config* c, const char* policy);
/* "study1" | "study3" */
ETW_API etw_status etw_study_config_set_calibration_mode(etw_study_config* c, const char* mode);
ETW_API etw_status etw_study_config_set_perceiver(etw_study_config* c, const etw_perceiver* p);
/* Over-current injected during the given trial index (per participant); -1 disables. */
ETW_API etw_status etw_study_config_set_inject_lockout(etw_study_config* c, int trial);

typedef struct etw_run_result {
    int aborted;
    size_t study1_trials;
    size_t study2_trials;
} etw_run_result;

/* study: "study1", "study2" or "all". Writes study1.jsonl and/or study2.jsonl into out_dir.
 * A run aborted by the safety interlock still writes its partial log(s) and returns ETW_E_LOCKOUT. */
ETW_API etw_status etw_run(const etw_study_config* c, const etw_handmap* map, const char* study, const char* out_dir,
                           etw_run_result* result);

/* ---- analysis ----------------------------------------------------------- */

/* Either log path may be NULL (not both). Writes report.json, CSV tables and heatmaps
 * into out_dir; report_json (optional) receives the report.json text. */
ETW_API etw_status etw_analyze(const etw_handmap* map, const char* study1_log, const char* study2_log,
                               const char* out_dir, int greenhouse_geisser, int welch, char** report_json);

/* ---- interaction replay ------------------------------------------------- */

/* visual_size / opacity: NULL for no visual feedback. Writes one JSON line per emitted action. */
ETW_API etw_status etw_interact(const etw_handmap* map, const etw_perceiver* p, const char* scene_path,
                                const char* poses_path, const char* policy, const char* visual_size,
                                const char* opacity, uint64_t seed, const char* out_path, size_t* actions);

/* ---- console backend ---------------------------------------------------- */

typedef struct etw_server etw_server;

/* port 0 picks a free port; ETW_E_IO when the port is in use. */
ETW_API etw_status etw_server_create(int port, uint64_t seed, const char* policy, etw_server** out);
ETW_API void etw_server_free(etw_server* s);
ETW_API int etw_server_port(const etw_server* s);
/* Blocks until etw_server_request_stop(); the device is stopped and disarmed on return. */
ETW_API etw_status etw_server_run(etw_server* s);
/* Async-signal-safe. */
ETW_API void etw_server_request_stop(etw_server* s);
/* Writes the session's trials as session-study1.jsonl / session-study2.jsonl (only non-empty ones) into out_dir. */
ETW_API etw_status etw_server_write_logs(const etw_server* s, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
