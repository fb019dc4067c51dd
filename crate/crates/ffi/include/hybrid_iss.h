#ifndef HYBRID_ISS_H
#define HYBRID_ISS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HsgStatus {
  HSG_STATUS_OK = 0,
  HSG_STATUS_NULL_POINTER = 1,
  HSG_STATUS_INVALID_UTF8 = 2,
  HSG_STATUS_INVALID_SPEC = 3,
  HSG_STATUS_PIPELINE = 4,
  HSG_STATUS_INVALID_ARGUMENT = 5,
  HSG_STATUS_PANIC = 6,
} HsgStatus;

typedef enum HsgMode {
  HSG_MODE_AUTO = 0,
  HSG_MODE_ADT = 1,
  HSG_MODE_RADT = 2,
  HSG_MODE_NONE = 3,
} HsgMode;

typedef enum HsgVerdict {
  HSG_VERDICT_CERTIFIED_ISS = 0,
  HSG_VERDICT_CERTIFIED_GAS = 1,
  HSG_VERDICT_CERTIFIED_FOR_SOLUTION_CLASS = 2,
  HSG_VERDICT_INCONCLUSIVE = 3,
  HSG_VERDICT_REFUTED = 4,
} HsgVerdict;

typedef enum HsgRegion {
  HSG_REGION_UNRESTRICTED = 0,
  HSG_REGION_ADT = 1,
  HSG_REGION_RADT = 2,
  HSG_REGION_EMPTY_FOR_COMPLETE = 3,
} HsgRegion;

// Result of one pipeline run.
typedef struct HsgCertificate HsgCertificate;

// Parsed network description.
typedef struct HsgSpec HsgSpec;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *hsg_last_error_message(void);

// Parses a JSON network description.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum HsgStatus hsg_spec_from_json(const char *json, struct HsgSpec **out);

// # Safety
// `spec` must come from [`hsg_spec_from_json`] and not be freed twice.
void hsg_spec_free(struct HsgSpec *spec);

// Runs the pipeline. Inconclusive and refuted outcomes still succeed
// with a certificate; only malformed models fail.
//
// # Safety
// `spec` must be a live handle and `out` a writable pointer.
enum HsgStatus hsg_certify(const struct HsgSpec *spec,
                           enum HsgMode mode,
                           struct HsgCertificate **out);

// # Safety
// `cert` must be a live handle and `out` a writable pointer.
enum HsgStatus hsg_certificate_verdict(const struct HsgCertificate *cert, enum HsgVerdict *out);

// Composite exponential flow and jump rates. Fails with
// `INVALID_ARGUMENT` when the run stopped before composing.
//
// # Safety
// `cert` must be a live handle; `c` and `d` writable pointers.
enum HsgStatus hsg_certificate_rates(const struct HsgCertificate *cert, double *c, double *d);

// Full report as JSON; release with [`hsg_string_free`].
//
// # Safety
// `cert` must be a live handle and `out` a writable pointer.
enum HsgStatus hsg_certificate_to_json(const struct HsgCertificate *cert, char **out);

// # Safety
// `s` must come from this library and not be freed twice.
void hsg_string_free(char *s);

// # Safety
// `cert` must come from [`hsg_certify`] and not be freed twice.
void hsg_certificate_free(struct HsgCertificate *cert);

// Spectral radius of a nonnegative row-major `n × n` matrix.
//
// # Safety
// `m` must point to `n * n` doubles and `out` be writable.
enum HsgStatus hsg_spectral_radius(const double *m, size_t n, double *out);

// Dwell-time region for composite rates. `bound` receives the `δ` or
// `δ*` bound (possibly infinite) and NaN for the other classes.
//
// # Safety
// `class` and `bound` must be writable.
enum HsgStatus hsg_dwell_region(double c, double d, enum HsgRegion *class_, double *bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYBRID_ISS_H */
