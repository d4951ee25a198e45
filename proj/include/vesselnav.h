#ifndef VESSELNAV_H
#define VESSELNAV_H

/* C interface of the endovascular navigation testbed. All entry points
 * return a vn_status; on failure, vn_last_error() describes what went wrong.
 * Handles are opaque and freed with their matching vn_*_free function. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum vn_status {
    VN_OK = 0,
    VN_ERR_CONFIG = 1,    /* invalid or contradictory settings */
    VN_ERR_IO = 2,        /* cannot write an output */
    VN_ERR_LOAD = 3,      /* cannot read or parse an input */
    VN_ERR_GEOMETRY = 4,  /* off-tree positions, degenerate branches */
    VN_ERR_PARAMETER = 5, /* bad argument to a call */
    VN_ERR_LIFECYCLE = 6, /* call out of order */
    VN_ERR_INTERNAL = 7   /* invariant violation; please report */
} vn_status;

/* Message of the most recent failure on the calling thread. Never NULL;
 * empty when no failure has occurred. The pointer stays valid until the next
 * failing call on the same thread. */
const char* vn_last_error(void);

/* Library version as "major.minor.patch". */
const char* vn_version(void);

/* Runs one pipeline command: "gen-vasc", "train", "eval", "compare", or
 * "report". config_path is a key-value settings file (NULL for defaults);
 * overrides are "key=value" strings applied on top, in order. Outputs land
 * under the directory named by the "out" key. */
vn_status vn_run(const char* command, const char* config_path,
                 const char* const* overrides, int n_overrides);

/* --- synthetic anatomies ------------------------------------------------- */

typedef struct vn_tree vn_tree;

/* Generates a ten-branch vascular tree with default anatomy parameters. */
vn_status vn_tree_generate(uint64_t seed, vn_tree** out);
vn_status vn_tree_load(const char* path, vn_tree** out);
vn_status vn_tree_save(const vn_tree* tree, const char* path);
void vn_tree_free(vn_tree* tree);

/* Branch count, arch type (0 = type I, 1 = type II), and tortuosity of the
 * right / left carotid chains. Any output pointer may be NULL to skip it. */
vn_status vn_tree_stats(const vn_tree* tree, int* n_branches, int* arch_type,
                        double* right_tortuosity, double* left_tortuosity);

#ifdef __cplusplus
}
#endif

#endif /* VESSELNAV_H */
