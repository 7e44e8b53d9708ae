#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "itin/csv.hpp"
#include "itin/numkit.hpp"
#include "itin/particle.hpp"

namespace itin {

/// Fixed-length conditioning signal computed from a state trajectory:
/// the (x, y) positions of `keyframes` states sampled uniformly over the
/// horizon, endpoints always included. Deliberately lossy between keyframes.
struct Intent {
    Vector values;      // 2 * keyframes
    int keyframes = 0;
    int horizon = 0;    // T the intent was computed for
};

struct EmbedConfig {
    int keyframes = 8;
    bool normalize = false;  // divide positions by c_max
    double c_max = 1.0;      // used only when normalize is set

    void validate() const {
        if (keyframes < 2) throw InvalidInput("EmbedConfig: keyframes must be >= 2");
        if (normalize && !(c_max > 0.0))
            throw InvalidInput("EmbedConfig: c_max must be > 0 when normalizing");
    }
};

inline std::vector<int> keyframe_indices(int horizon, int keyframes) {
    std::vector<int> idx(keyframes);
    for (int j = 0; j < keyframes; ++j)
        idx[j] = static_cast<int>(
            std::llround(static_cast<double>(j) * horizon / (keyframes - 1)));
    return idx;
}

inline Intent embed(const std::vector<ParticleState>& traj_states, const EmbedConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(traj_states.size()) < cfg.keyframes)
        throw InvalidInput("embed: trajectory has fewer states than keyframes");
    const int horizon = static_cast<int>(traj_states.size()) - 1;
    const double scale = cfg.normalize ? 1.0 / cfg.c_max : 1.0;

    Intent z;
    z.keyframes = cfg.keyframes;
    z.horizon = horizon;
    z.values.resize(2 * cfg.keyframes);
    const std::vector<int> idx = keyframe_indices(horizon, cfg.keyframes);
    for (int j = 0; j < cfg.keyframes; ++j) {
        z.values(2 * j) = traj_states[idx[j]].x * scale;
        z.values(2 * j + 1) = traj_states[idx[j]].y * scale;
    }
    return z;
}

/// Flat CSV row: keyframes, horizon, then the values.
inline std::string intent_to_csv_row(const Intent& z) {
    std::ostringstream os;
    os << z.keyframes << ',' << z.horizon;
    for (Eigen::Index i = 0; i < z.values.size(); ++i) os << ',' << csv::num(z.values(i));
    return os.str();
}

inline Intent intent_from_csv_row(const std::string& row) {
    const auto fields = csv::split_line(row);
    if (fields.size() < 2) throw InvalidInput("intent_from_csv_row: too few fields");
    Intent z;
    z.keyframes = static_cast<int>(csv::parse_num(fields[0]));
    z.horizon = static_cast<int>(csv::parse_num(fields[1]));
    z.values.resize(static_cast<Eigen::Index>(fields.size()) - 2);
    for (std::size_t i = 2; i < fields.size(); ++i)
        z.values(static_cast<Eigen::Index>(i) - 2) = csv::parse_num(fields[i]);
    if (z.values.size() != 2 * z.keyframes)
        throw InvalidInput("intent_from_csv_row: value count does not match keyframes");
    return z;
}

}  // namespace itin
