#ifndef SEMCOMPOSE_H
#define SEMCOMPOSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. `SEM_STATUS_OK` is zero.
typedef enum SemStatus {
  SEM_STATUS_OK = 0,
  SEM_STATUS_NULL_ARGUMENT = 1,
  SEM_STATUS_INVALID_UTF8 = 2,
  // Unparseable JSON or ontology text.
  SEM_STATUS_MALFORMED = 3,
  // Unknown session, service, suggestion or step.
  SEM_STATUS_NOT_FOUND = 4,
  // Duplicate id, conflicting declaration or token mismatch.
  SEM_STATUS_CONFLICT = 5,
  // The suggestion no longer matches the session.
  SEM_STATUS_STALE = 6,
  // Well-formed input the engine refuses.
  SEM_STATUS_INVALID = 7,
  SEM_STATUS_INTERNAL = 8,
} SemStatus;

// Opaque engine handle.
typedef struct SemEngine SemEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Creates an empty in-memory engine. Release it with [`sem_engine_free`].
struct SemEngine *sem_engine_new(void);

// # Safety
// `engine` must come from [`sem_engine_new`] and not be used afterwards.
void sem_engine_free(struct SemEngine *engine);

// # Safety
// `s` must be a string returned through an `out` argument, freed once.
void sem_string_free(char *s);

// Loads an ontology document. `format` is "triples", "structured" or null
// to detect it.
//
// # Safety
// Pointers must be null or valid; strings NUL-terminated.
enum SemStatus sem_load_ontology(const struct SemEngine *engine,
                                 const char *document,
                                 const char *format,
                                 char **out);

// # Safety
// See [`sem_load_ontology`].
enum SemStatus sem_classify(const struct SemEngine *engine, char **out);

// Registers a profile, an array of profiles or a bundle, all or nothing.
//
// # Safety
// See [`sem_load_ontology`].
enum SemStatus sem_register(const struct SemEngine *engine, const char *profiles, char **out);

// # Safety
// See [`sem_load_ontology`].
enum SemStatus sem_deregister(const struct SemEngine *engine, const char *service_id, char **out);

// Writes the new session id (a bare string) to `out`.
//
// # Safety
// See [`sem_load_ontology`].
enum SemStatus sem_session_new(const struct SemEngine *engine, char **out);

// # Safety
// See [`sem_load_ontology`].
enum SemStatus sem_session_view(const struct SemEngine *engine, const char *session, char **out);

// Sets or revises the session's abstract request.
//
// # Safety
// See [`sem_load_ontology`].
enum SemStatus sem_set_request(const struct SemEngine *engine,
                               const char *session,
                               const char *request,
                               char **out);

// Runs one session verb, e.g. `{"verb": "plan", "k": 2}`, and writes the
// response document.
//
// # Safety
// See [`sem_load_ontology`].
enum SemStatus sem_invoke(const struct SemEngine *engine,
                          const char *session,
                          const char *request,
                          char **out);

// Exports the session's process. `format` is "profile-bundle" or
// "plan-report".
//
// # Safety
// See [`sem_load_ontology`].
enum SemStatus sem_export(const struct SemEngine *engine,
                          const char *session,
                          const char *format,
                          char **out);

// Replaces the session's process with an exported one.
//
// # Safety
// See [`sem_load_ontology`].
enum SemStatus sem_import(const struct SemEngine *engine,
                          const char *session,
                          const char *document,
                          char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMCOMPOSE_H */
