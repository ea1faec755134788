#ifndef UIHPQ_H
#define UIHPQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define UIHPQ_OK 0

// A required pointer argument was null.
#define UIHPQ_ERR_NULL 1

// A string argument was not valid UTF-8, or a parameter was out of range.
#define UIHPQ_ERR_INVALID_ARGUMENT 2

// Malformed `.pmap` text or JSON configuration.
#define UIHPQ_ERR_PARSE 3

// The input does not describe a valid map.
#define UIHPQ_ERR_INVALID_MAP 4

// A sampler hit its size, attempt or enumeration cap.
#define UIHPQ_ERR_BUDGET 5

// The output buffer is smaller than `needed`.
#define UIHPQ_ERR_BUFFER_TOO_SMALL 6

// Any other library error.
#define UIHPQ_ERR_INTERNAL 7

// A Rust panic was caught at the boundary.
#define UIHPQ_ERR_PANIC 8

// A rooted planar map.
typedef struct UihpqMap UihpqMap;

// An experiment report.
typedef struct UihpqReport UihpqReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *uihpq_version(void);

// Message of the last failed call on this thread.
//
// # Safety
// `buf` must be null or valid for `cap` bytes; `needed` must be valid.
int32_t uihpq_last_error(char *buf, size_t cap, size_t *needed);

// Boltzmann quadrangulation of perimeter `2 sigma` at skewness `p`, drawn
// from the stream of `seed`.
//
// # Safety
// `out` must be valid for a pointer write.
int32_t uihpq_sample_boltzmann(uint32_t sigma, double p, uint64_t seed, struct UihpqMap **out);

// Ball of radius `radius` around the root vertex of the UIHPQ_p.
//
// # Safety
// `out` must be valid for a pointer write.
int32_t uihpq_sample_ball(double p, uint32_t radius, uint64_t seed, struct UihpqMap **out);

// Parses `.pmap` text; the map must be valid.
//
// # Safety
// `text` must be a NUL-terminated string; `out` valid for a pointer write.
int32_t uihpq_map_from_pmap(const char *text, struct UihpqMap **out);

// Releases a map; null is ignored.
//
// # Safety
// `m` must be null or a handle from this library not yet freed.
void uihpq_map_free(struct UihpqMap *m);

// Numbers of half-edges, vertices and faces (outer face included).
//
// # Safety
// `m` must be a live handle; out-pointers must be valid.
int32_t uihpq_map_counts(const struct UihpqMap *m,
                         size_t *half_edges,
                         size_t *vertices,
                         size_t *faces);

// Number of half-edges on the outer face (`2 sigma` for perimeter `2 sigma`).
//
// # Safety
// `m` must be a live handle; `out` must be valid.
int32_t uihpq_map_perimeter(const struct UihpqMap *m, size_t *out);

// Writes 1 if the outer face is a simple cycle, else 0.
//
// # Safety
// `m` must be a live handle; `out` must be valid.
int32_t uihpq_map_is_simple_boundary(const struct UihpqMap *m, int32_t *out);

// `.pmap` text of the map, NUL-terminated.
//
// # Safety
// `m` must be a live handle; `buf` null or valid for `cap` bytes.
int32_t uihpq_map_to_pmap(const struct UihpqMap *m, char *buf, size_t cap, size_t *needed);

// Canonical encoding bytes: equal iff the rooted maps are isomorphic.
//
// # Safety
// `m` must be a live handle; `buf` null or valid for `cap` bytes.
int32_t uihpq_map_canonical_encoding(const struct UihpqMap *m,
                                     uint8_t *buf,
                                     size_t cap,
                                     size_t *needed);

// Runs a CLI command (`"verify"`, `"prefix-law"`, …). `config_json` is null
// or a JSON object with any of the config fields (`seed`, `p`, `n`, `sigma`,
// `radius`, `samples`, `tolerance`, `length`, `grid`, `modes`, `extra`).
//
// # Safety
// `command` must be a NUL-terminated string, `config_json` null or one;
// `out` valid for a pointer write.
int32_t uihpq_run(const char *command, const char *config_json, struct UihpqReport **out);

// Writes 1 if every check of the report passed, else 0.
//
// # Safety
// `r` must be a live handle; `out` must be valid.
int32_t uihpq_report_pass(const struct UihpqReport *r, int32_t *out);

// JSON text of the report, NUL-terminated.
//
// # Safety
// `r` must be a live handle; `buf` null or valid for `cap` bytes.
int32_t uihpq_report_json(const struct UihpqReport *r, char *buf, size_t cap, size_t *needed);

// CSV text of the report (one line per check), NUL-terminated.
//
// # Safety
// `r` must be a live handle; `buf` null or valid for `cap` bytes.
int32_t uihpq_report_csv(const struct UihpqReport *r, char *buf, size_t cap, size_t *needed);

// Releases a report; null is ignored.
//
// # Safety
// `r` must be null or a handle from this library not yet freed.
void uihpq_report_free(struct UihpqReport *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UIHPQ_H */
