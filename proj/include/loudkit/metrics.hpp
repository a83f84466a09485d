#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "loudkit/audio.hpp"
#include "loudkit/errors.hpp"
#include "loudkit/stems.hpp"

namespace loudkit {

/// Infinite (or astronomically large) ratios are reported as this
/// sentinel so medians stay totally ordered.
inline constexpr double kSdrCapDb = 300.0;

struct ProjectionConfig {
    std::size_t filter_len = 512;
    double window_s = 1.0;
    double hop_s = 1.0;
};

struct FramewiseScore {
    std::vector<double> per_window;
    double median = std::numeric_limits<double>::quiet_NaN();
    double mean = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_excluded = 0;
};

namespace detail {

inline double clamp_db_ratio(double num, double den) {
    if (den <= 0.0) return kSdrCapDb;
    if (num <= 0.0) return -kSdrCapDb;
    return std::clamp(10.0 * std::log10(num / den), -kSdrCapDb, kSdrCapDb);
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return (n % 2 == 1) ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double mean_of(std::span<const double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

/// Solve the symmetric positive semi-definite system A x = b by LDL^T.
/// Pivots below tol are dropped (their directions carry no reference
/// energy, so any particular solution gives the same projection).
inline std::vector<double> solve_psd(std::vector<std::vector<double>>& a, std::vector<double> b) {
    const std::size_t n = b.size();
    std::vector<double> d(n, 0.0);
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a[i][i]);
    const double tol = 1e-12 * max_diag;

    for (std::size_t j = 0; j < n; ++j) {
        double dj = a[j][j];
        for (std::size_t k = 0; k < j; ++k) dj -= a[j][k] * a[j][k] * d[k];
        if (dj <= tol) {
            d[j] = 0.0;
            for (std::size_t i = j + 1; i < n; ++i) a[i][j] = 0.0;
            continue;
        }
        d[j] = dj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a[i][j];
            for (std::size_t k = 0; k < j; ++k) v -= a[i][k] * a[j][k] * d[k];
            a[i][j] = v / dj;
        }
    }
    // forward: L z = b
    for (std::size_t i = 0; i < n; ++i) {
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) v -= a[i][k] * b[k];
        b[i] = v;
    }
    // diagonal
    for (std::size_t i = 0; i < n; ++i) b[i] = d[i] > 0.0 ? b[i] / d[i] : 0.0;
    // backward: L^T x = w
    for (std::size_t i = n; i-- > 0;) {
        double v = b[i];
        for (std::size_t k = i + 1; k < n; ++k) v -= a[k][i] * b[k];
        b[i] = v;
    }
    return b;
}

/// Least-squares projection of one estimate window onto the 0..L-1
/// sample delays of the reference channel. Delayed columns use the true
/// reference history before the window (zeros before the signal start),
/// so a pure delay smaller than the filter is absorbed exactly.
/// Accumulates projection and residual energy into num/den.
inline void project_window(std::span<const double> ref, std::span<const double> est,
                           std::size_t window_start, std::size_t window_len, std::size_t filter_len,
                           double& num, double& den) {
    const auto ref_at = [&](std::ptrdiff_t i) {
        return i >= 0 ? ref[static_cast<std::size_t>(i)] : 0.0;
    };
    const auto t0 = static_cast<std::ptrdiff_t>(window_start);
    const std::size_t len = window_len;
    const std::size_t taps = filter_len;

    // normal equations: first row by direct correlation, the rest by the
    // rank-one update C[i+1][j+1] = C[i][j] + head term - tail term
    std::vector<std::vector<double>> c(taps, std::vector<double>(taps, 0.0));
    for (std::size_t j = 0; j < taps; ++j) {
        double acc = 0.0;
        for (std::size_t n = 0; n < len; ++n)
            acc += ref_at(t0 + static_cast<std::ptrdiff_t>(n)) *
                   ref_at(t0 + static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(j));
        c[0][j] = acc;
        c[j][0] = acc;
    }
    for (std::size_t i = 1; i < taps; ++i) {
        for (std::size_t j = i; j < taps; ++j) {
            const auto di = static_cast<std::ptrdiff_t>(i);
            const auto dj = static_cast<std::ptrdiff_t>(j);
            const double head = ref_at(t0 - di) * ref_at(t0 - dj);
            const double tail = ref_at(t0 + static_cast<std::ptrdiff_t>(len) - di) *
                                ref_at(t0 + static_cast<std::ptrdiff_t>(len) - dj);
            const double v = c[i - 1][j - 1] + head - tail;
            c[i][j] = v;
            c[j][i] = v;
        }
    }

    std::vector<double> rhs(taps, 0.0);
    for (std::size_t j = 0; j < taps; ++j) {
        double acc = 0.0;
        for (std::size_t n = 0; n < len; ++n)
            acc += est[window_start + n] *
                   ref_at(t0 + static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(j));
        rhs[j] = acc;
    }

    const std::vector<double> h = solve_psd(c, std::move(rhs));

    for (std::size_t n = 0; n < len; ++n) {
        double s = 0.0;
        for (std::size_t k = 0; k < taps; ++k)
            s += h[k] * ref_at(t0 + static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(k));
        const double e = est[window_start + n] - s;
        num += s * s;
        den += e * e;
    }
}

} // namespace detail

/// Scale-invariant SDR over the whole clip (channels concatenated into
/// one vector). Exact equality or an exactly scaled estimate hits the
/// 300 dB cap.
inline double si_sdr(const AudioClip& reference, const AudioClip& estimate) {
    require_same_shape(reference, estimate, "si_sdr");
    double ref_energy = 0.0, dot = 0.0;
    for (std::size_t c = 0; c < reference.n_channels(); ++c) {
        const auto& r = reference.samples[c];
        const auto& e = estimate.samples[c];
        for (std::size_t n = 0; n < r.size(); ++n) {
            ref_energy += r[n] * r[n];
            dot += e[n] * r[n];
        }
    }
    if (ref_energy <= 0.0) throw ArgumentError("si_sdr: reference has zero energy");
    const double alpha = dot / ref_energy;
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < reference.n_channels(); ++c) {
        const auto& r = reference.samples[c];
        const auto& e = estimate.samples[c];
        for (std::size_t n = 0; n < r.size(); ++n) {
            const double s = alpha * r[n];
            const double d = e[n] - s;
            num += s * s;
            den += d * d;
        }
    }
    return detail::clamp_db_ratio(num, den);
}

/// museval-style framewise SDR with a least-squares distortion filter.
/// Per window and channel the estimate is projected onto delayed copies
/// of the matching reference channel; channel energies are summed before
/// the log. Windows with a silent reference are excluded and counted.
inline FramewiseScore framewise_sdr(const AudioClip& reference, const AudioClip& estimate,
                                    const ProjectionConfig& config = {}) {
    require_same_shape(reference, estimate, "framewise_sdr");
    if (config.filter_len < 1) throw ConfigError("filter_len must be >= 1");
    if (!(config.hop_s > 0.0) || config.window_s < config.hop_s)
        throw ConfigError("require window >= hop > 0");
    const double fs = reference.sample_rate;
    const auto window = static_cast<std::size_t>(std::lround(config.window_s * fs));
    const auto hop = static_cast<std::size_t>(std::lround(config.hop_s * fs));
    if (window <= config.filter_len) throw ConfigError("window must exceed filter_len samples");
    const std::size_t frames = reference.n_frames();
    if (frames < window)
        throw InsufficientDurationError("clip shorter than one evaluation window");

    FramewiseScore score;
    const std::size_t n_windows = (frames - window) / hop + 1;
    for (std::size_t w = 0; w < n_windows; ++w) {
        const std::size_t start = w * hop;
        double ref_energy = 0.0;
        bool identical = true;
        for (std::size_t c = 0; c < reference.n_channels(); ++c) {
            for (std::size_t n = start; n < start + window; ++n) {
                ref_energy += reference.samples[c][n] * reference.samples[c][n];
                identical = identical && reference.samples[c][n] == estimate.samples[c][n];
            }
        }
        if (ref_energy <= 0.0) {
            ++score.n_excluded; // silent reference: normal equations are singular
            continue;
        }
        if (identical) {
            score.per_window.push_back(kSdrCapDb); // projection is exact
            continue;
        }
        double num = 0.0, den = 0.0;
        for (std::size_t c = 0; c < reference.n_channels(); ++c)
            detail::project_window(reference.samples[c], estimate.samples[c], start, window,
                                   config.filter_len, num, den);
        if (num <= 0.0 && den <= 0.0) {
            ++score.n_excluded;
            continue;
        }
        score.per_window.push_back(detail::clamp_db_ratio(num, den));
    }
    score.median = detail::median_of(score.per_window);
    score.mean = detail::mean_of(score.per_window);
    return score;
}

struct StemScore {
    FramewiseScore sdr;
    double si_sdr_db = 0.0;
};

struct EvalResult {
    std::string track_id;
    std::map<std::string, StemScore> stems;
};

inline EvalResult evaluate_stemsets(const StemSet& reference, const StemSet& estimate,
                                    const ProjectionConfig& config = {},
                                    const std::string& track_id = {}) {
    EvalResult result;
    result.track_id = track_id;
    for (const char* name : kStemNames) {
        const auto ref_it = reference.stems.find(name);
        const auto est_it = estimate.stems.find(name);
        if (ref_it == reference.stems.end() || est_it == estimate.stems.end())
            throw ConsistencyError(std::string("missing stem '") + name + "' in evaluation input");
        StemScore s;
        s.sdr = framewise_sdr(ref_it->second, est_it->second, config);
        s.si_sdr_db = si_sdr(ref_it->second, est_it->second);
        result.stems[name] = s;
    }
    return result;
}

struct SummaryRow {
    std::string stem;
    double sdr_median = 0.0; // median of per-track medians
    double sdr_mean = 0.0;   // mean of per-track means
    double si_sdr_mean = 0.0;
};

/// Aggregate across tracks with the usual table convention, plus an
/// "avg" row averaging the four stems.
inline std::vector<SummaryRow> aggregate_tracks(std::span<const EvalResult> results) {
    if (results.empty()) throw ArgumentError("aggregate_tracks: empty input");
    std::vector<SummaryRow> rows;
    for (const char* name : kStemNames) {
        std::vector<double> medians, means, si;
        for (const auto& r : results) {
            const auto it = r.stems.find(name);
            if (it == r.stems.end())
                throw ConsistencyError(std::string("track '") + r.track_id + "' missing stem " + name);
            medians.push_back(it->second.sdr.median);
            means.push_back(it->second.sdr.mean);
            si.push_back(it->second.si_sdr_db);
        }
        SummaryRow row;
        row.stem = name;
        row.sdr_median = detail::median_of(medians);
        row.sdr_mean = detail::mean_of(means);
        row.si_sdr_mean = detail::mean_of(si);
        rows.push_back(row);
    }
    SummaryRow avg;
    avg.stem = "avg";
    for (const auto& row : rows) {
        avg.sdr_median += row.sdr_median / static_cast<double>(rows.size());
        avg.sdr_mean += row.sdr_mean / static_cast<double>(rows.size());
        avg.si_sdr_mean += row.si_sdr_mean / static_cast<double>(rows.size());
    }
    rows.push_back(avg);
    return rows;
}

} // namespace loudkit
