/* musekit C API: a symbolic-music toolkit behind a stable C ABI.
 *
 * Conventions: every fallible call returns mk_status (MK_OK on success)
 * and leaves a human-readable message in mk_last_error() on failure
 * (thread-local, valid until the next API call on that thread). Strings
 * returned through char** out-parameters are heap-allocated; release them
 * with mk_string_free(). Handles are opaque; release with mk_music_free().
 */

#ifndef MUSEKIT_H
#define MUSEKIT_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mk_status {
    MK_OK = 0,
    MK_ERR_INVALID_ARGUMENT = 1,
    MK_ERR_VALIDATION = 2,
    MK_ERR_PARSE = 3,
    MK_ERR_SCHEMA = 4,
    MK_ERR_VERSION = 5,
    MK_ERR_UNSUPPORTED = 6,
    MK_ERR_DOMAIN = 7,
    MK_ERR_IO = 8,
    MK_ERR_ARCHIVE = 9,
    MK_ERR_INTEGRITY = 10,
    MK_ERR_TRANSFER = 11,
    MK_ERR_CONFIG = 12,
    MK_ERR_INTERNAL = 13
} mk_status;

typedef struct mk_music mk_music;

const char* mk_version(void);
const char* mk_status_name(mk_status status);
const char* mk_last_error(void);
void mk_string_free(char* text);

/* --- music I/O -----------------------------------------------------------
 * format: "midi" | "musicxml" | "mxl" | "abc" | "muspy", or NULL to infer
 * from the file extension (.mid/.midi, .xml/.musicxml, .mxl, .abc,
 * .muspy.json). Writable formats: midi, musicxml, muspy.
 */
mk_status mk_music_read(const char* path, const char* format, mk_music** out);
mk_status mk_music_write(const mk_music* music, const char* path, const char* format);
void mk_music_free(mk_music* music);

/* --- inspection and timing ----------------------------------------------- */
mk_status mk_music_adjust_resolution(mk_music* music, int target);
int mk_music_resolution(const mk_music* music);
int64_t mk_music_end_time(const mk_music* music);
double mk_music_duration_seconds(const mk_music* music);
size_t mk_music_track_count(const mk_music* music);
size_t mk_music_note_count(const mk_music* music);

/* violations_json: JSON array, empty when the music is valid */
mk_status mk_music_validate(const mk_music* music, char** violations_json);

/* the canonical document as text */
mk_status mk_music_to_json(const mk_music* music, char** document);

/* every objective metric at default parameters, as a flat JSON map */
mk_status mk_music_metrics_json(const mk_music* music, char** report_json);

/* --- representations -------------------------------------------------------
 * representation: "event" | "pitch" | "notes" | "pianoroll".
 * config_json (NULL for defaults) understands: use_velocity, velocity_bins,
 * max_time_shift, use_end_of_sequence, experiment (bool: the 357-token
 * setup), overlap_policy ("error"|"keep-highest"|"skip-new"), mode
 * ("binary"|"velocity"). Token sequences are written as newline-delimited
 * integers, or length-prefixed binary (u32 count then i32 tokens, little
 * endian) when binary_tokens is nonzero; notes and pianoroll write CSV.
 */
mk_status mk_music_encode_file(const mk_music* music, const char* representation,
                               const char* config_json, const char* out_path,
                               int binary_tokens);

/* --- corpus statistics ------------------------------------------------------
 * report: "lengths" | "tempos" | "keys". Writes <out_prefix>.csv and
 * <out_prefix>_hist.csv, returns a JSON summary.
 */
mk_status mk_stats_run(const char* directory, const char* report,
                       const char* out_prefix, char** summary_json);

/* --- dataset management ----------------------------------------------------- */
mk_status mk_dataset_download(const char* manifest_path, const char* root,
                              char** report_json);
mk_status mk_dataset_convert(const char* manifest_path, const char* root,
                             char** report_json);
mk_status mk_dataset_split(const char* manifest_path, const char* root, double train,
                           double valid, double test, uint64_t seed,
                           const char* out_path, char** report_json);

/* --- experiments -------------------------------------------------------------
 * Runs the cross-dataset perplexity experiment described by a JSON config.
 * Writes the log-perplexity matrix CSV to out_csv and the full report to
 * out_json (either may be NULL); summary_json receives the report.
 */
mk_status mk_experiment_run(const char* config_path, const char* out_csv,
                            const char* out_json, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* MUSEKIT_H */
