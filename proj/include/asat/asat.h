/* C interface to the asat engine.
 *
 * Every call returns an asat_status. On failure asat_last_error() holds a
 * message for the calling thread. Functions producing JSON hand back a
 * heap string that the caller releases with asat_string_free().
 */
#ifndef ASAT_ASAT_H
#define ASAT_ASAT_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define ASAT_API __declspec(dllexport)
#else
#define ASAT_API __attribute__((visibility("default")))
#endif

typedef enum asat_status {
    ASAT_OK = 0,
    ASAT_INVALID_ARGUMENT = 1,
    ASAT_NOT_FOUND = 2,
    ASAT_MISSING_ARTIFACT = 3,
    ASAT_PARSE_ERROR = 4,
    ASAT_OUT_OF_COVERAGE = 5,
    ASAT_UNKNOWN_DATE = 6,
    ASAT_TRAINING_ERROR = 7,
    ASAT_IO_ERROR = 8,
    ASAT_INTERNAL_ERROR = 9
} asat_status;

typedef struct asat_engine asat_engine;
typedef struct asat_server asat_server;

ASAT_API const char* asat_version(void);
ASAT_API const char* asat_status_name(asat_status status);
/* Message of the last failed call on this thread; "" if none. */
ASAT_API const char* asat_last_error(void);
ASAT_API void asat_string_free(char* text);

/* Pipeline stages. Options are JSON objects:
 *   ingest:      disease, demographics, mobility, posts, [pois], out
 *   build_graph: snapshot, [out], [k], [metric: "euclidean"|"haversine"]
 *   train:       snapshot, models, [graph], [component], [seed],
 *                [perception_epochs], [cgan_steps], [gae_epochs],
 *                [threshold], [synth_count]
 *   export:      snapshot, out, [graph]
 * `report_json` may be NULL. */
ASAT_API asat_status asat_ingest(const char* options_json, char** report_json);
ASAT_API asat_status asat_build_graph(const char* options_json, char** report_json);
ASAT_API asat_status asat_train(const char* options_json, char** report_json);
ASAT_API asat_status asat_export_datasets(const char* options_json, char** report_json);

/* graph and gamma may be NULL (defaults: <snapshot>/graph, uniform weights). */
ASAT_API asat_status asat_engine_open(const char* snapshot, const char* models, const char* graph,
                                      const char* gamma, asat_engine** out);
ASAT_API void asat_engine_close(asat_engine* engine);

/* Dates are "YYYY-MM-DD" or NULL for the latest ingested date. */
ASAT_API asat_status asat_engine_assess_location(const asat_engine* engine, double lat, double lon,
                                                 const char* date, char** json);
ASAT_API asat_status asat_engine_assess_area(const asat_engine* engine, const char* geo_id,
                                             const char* date, char** json);
ASAT_API asat_status asat_engine_timeseries(const asat_engine* engine, const char* geo_id,
                                            const char* from, const char* to, char** json);
ASAT_API asat_status asat_engine_pois(const asat_engine* engine, double lat, double lon,
                                      const char* tag, double radius_km, const char* date,
                                      char** json);
ASAT_API asat_status asat_engine_posts(const asat_engine* engine, const char* geo_id,
                                       const char* date, char** json);

/* The server keeps its own reference to the engine; closing the engine
 * handle afterwards is allowed. port 0 picks a free port. */
ASAT_API asat_status asat_server_start(const asat_engine* engine, const char* host, int port,
                                       asat_server** out);
ASAT_API int asat_server_port(const asat_server* server);
ASAT_API asat_status asat_server_reload(asat_server* server, const asat_engine* engine);
ASAT_API void asat_server_wait(asat_server* server);
ASAT_API void asat_server_stop(asat_server* server);
ASAT_API void asat_server_free(asat_server* server);

#ifdef __cplusplus
}
#endif

#endif
