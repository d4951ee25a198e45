#include "vesselnav.h"

#include <exception>
#include <new>
#include <string>

#include "vesselnav/anatomy.hpp"
#include "vesselnav/config.hpp"
#include "vesselnav/error.hpp"
#include "vesselnav/pipeline.hpp"
#include "vesselnav/vasctree.hpp"

struct vn_tree {
    vn::VascTree tree;
};

namespace {

thread_local std::string g_last_error;

vn_status status_of(vn::ErrorKind kind) {
    switch (kind) {
        case vn::ErrorKind::Config: return VN_ERR_CONFIG;
        case vn::ErrorKind::Io: return VN_ERR_IO;
        case vn::ErrorKind::Load: return VN_ERR_LOAD;
        case vn::ErrorKind::Geometry: return VN_ERR_GEOMETRY;
        case vn::ErrorKind::Parameter: return VN_ERR_PARAMETER;
        case vn::ErrorKind::Lifecycle: return VN_ERR_LIFECYCLE;
        case vn::ErrorKind::Internal: return VN_ERR_INTERNAL;
    }
    return VN_ERR_INTERNAL;
}

/// Runs f, routing every failure into the status + last-error convention.
template <class F>
vn_status guarded(F&& f) {
    try {
        f();
        return VN_OK;
    } catch (const vn::Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return VN_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return VN_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return VN_ERR_INTERNAL;
    }
}

vn_status param_error(const char* msg) {
    g_last_error = msg;
    return VN_ERR_PARAMETER;
}

} // namespace

extern "C" {

const char* vn_last_error(void) { return g_last_error.c_str(); }

const char* vn_version(void) { return "1.0.0"; }

vn_status vn_run(const char* command, const char* config_path,
                 const char* const* overrides, int n_overrides) {
    if (!command) return param_error("command must not be NULL");
    if (n_overrides < 0) return param_error("override count must be >= 0");
    if (n_overrides > 0 && !overrides)
        return param_error("overrides must not be NULL when a count is given");
    return guarded([&] {
        vn::KeyValueConfig cfg;
        if (config_path) cfg = vn::KeyValueConfig::load_file(config_path);
        std::vector<std::string> extra;
        for (int i = 0; i < n_overrides; ++i) {
            if (!overrides[i])
                vn::fail(vn::ErrorKind::Parameter,
                         "override " + std::to_string(i) + " is NULL");
            extra.emplace_back(overrides[i]);
        }
        cfg.apply_overrides(extra);
        vn::run_command(command, cfg);
    });
}

vn_status vn_tree_generate(uint64_t seed, vn_tree** out) {
    if (!out) return param_error("output handle must not be NULL");
    *out = nullptr;
    return guarded([&] {
        auto handle = new vn_tree{vn::generate_synthetic(vn::AnatomyParams{}, seed)};
        *out = handle;
    });
}

vn_status vn_tree_load(const char* path, vn_tree** out) {
    if (!out) return param_error("output handle must not be NULL");
    *out = nullptr;
    if (!path) return param_error("path must not be NULL");
    return guarded([&] {
        auto handle = new vn_tree{vn::load_tree(path)};
        *out = handle;
    });
}

vn_status vn_tree_save(const vn_tree* tree, const char* path) {
    if (!tree) return param_error("tree handle must not be NULL");
    if (!path) return param_error("path must not be NULL");
    return guarded([&] { vn::save_tree(tree->tree, path); });
}

void vn_tree_free(vn_tree* tree) { delete tree; }

vn_status vn_tree_stats(const vn_tree* tree, int* n_branches, int* arch_type,
                        double* right_tortuosity, double* left_tortuosity) {
    if (!tree) return param_error("tree handle must not be NULL");
    return guarded([&] {
        const vn::VascTree& t = tree->tree;
        if (n_branches) *n_branches = static_cast<int>(t.branches.size());
        if (arch_type)
            *arch_type = t.arch_type == vn::ArchType::TypeI ? 0 : 1;
        if (right_tortuosity) {
            vn::BranchId rica = t.id_of(vn::BranchLabel::RICA);
            *right_tortuosity =
                vn::tortuosity(t, {t.id_of(vn::BranchLabel::RCCA), 0.0},
                               {rica, t.branch(rica).total_length()});
        }
        if (left_tortuosity) {
            vn::BranchId lica = t.id_of(vn::BranchLabel::LICA);
            *left_tortuosity =
                vn::tortuosity(t, {t.id_of(vn::BranchLabel::LCCA), 0.0},
                               {lica, t.branch(lica).total_length()});
        }
    });
}

} // extern "C"
