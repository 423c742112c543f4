#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rhetorica/design.hpp"
#include "rhetorica/stm.hpp"

namespace rhetorica {

// ---- daily faction topic series -----------------------------------------------

struct FactionTopicSeries {
    FactionLabel faction = FactionLabel::Other;
    std::int64_t day0 = 0;       // day index of row 0
    Eigen::MatrixXd w;           // T x K average daily topic propensities
    std::vector<char> has_data;  // zero rows mark days without documents

    int n_days() const { return static_cast<int>(w.rows()); }
};

// w[x,k,i] = mean of theta[d,k] over documents of faction i on day x; zero row
// when the faction posted nothing that day.
inline std::vector<FactionTopicSeries> build_series(const StmModel& model,
                                                    const CovariateDesign& design) {
    const int D = design.n_docs();
    if (static_cast<int>(model.theta.rows()) != D)
        throw std::invalid_argument("build_series: design not aligned with model");
    std::int64_t dmin = design.day.front(), dmax = design.day.front();
    for (const auto d : design.day) {
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
    }
    const int T = static_cast<int>(dmax - dmin + 1);
    const int K = model.K;

    std::vector<FactionTopicSeries> out;
    for (const FactionLabel f :
         {FactionLabel::Brexiteer, FactionLabel::Remainer, FactionLabel::Other}) {
        FactionTopicSeries s;
        s.faction = f;
        s.day0 = dmin;
        s.w = Eigen::MatrixXd::Zero(T, K);
        s.has_data.assign(static_cast<std::size_t>(T), 0);
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(T);
        for (int d = 0; d < D; ++d) {
            if (design.faction[static_cast<std::size_t>(d)] != faction_level_index(f)) continue;
            const int x = static_cast<int>(design.day[static_cast<std::size_t>(d)] - dmin);
            s.w.row(x) += model.theta.row(d);
            counts(x) += 1.0;
        }
        for (int x = 0; x < T; ++x) {
            if (counts(x) > 0) {
                s.w.row(x) /= counts(x);
                s.has_data[static_cast<std::size_t>(x)] = 1;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

// ---- DTW lead/follow -------------------------------------------------------------

struct LeadFollowParams {
    int window = 30;   // days per evaluation window
    int max_lag = 6;   // Sakoe-Chiba band, in days
    int shift = 1;     // evaluation step
};

struct LeadFollowDay {
    std::int64_t day = 0;
    bool evaluable = false;
    double f_a_follows_b = 0.0;
    double f_b_follows_a = 0.0;
    double fl = 0.0;  // f_b_follows_a - f_a_follows_b; positive means A leads
};

struct LeadFollowResult {
    LeadFollowParams params;
    std::vector<LeadFollowDay> days;
};

namespace dyn_detail {

struct Frame {
    std::int64_t day = 0;
    Eigen::VectorXd v;
};

// DTW with a band on the day labels; returns the mean signed alignment offset
// mean(day_b - day_a) along the optimal path, or nullopt when no path fits in
// the band. Tie-breaking prefers the diagonal move and then the move toward
// the matrix diagonal, so the result mirrors exactly under transposition.
inline std::optional<double> dtw_mean_offset(const std::vector<Frame>& a,
                                             const std::vector<Frame>& b, int max_lag) {
    const std::size_t n = a.size(), m = b.size();
    if (n == 0 || m == 0) return std::nullopt;
    const double inf = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd cost(n, m);
    auto dist = [&](std::size_t i, std::size_t j) { return (a[i].v - b[j].v).norm(); };
    auto in_band = [&](std::size_t i, std::size_t j) {
        return std::llabs(a[i].day - b[j].day) <= max_lag;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (!in_band(i, j)) {
                cost(static_cast<int>(i), static_cast<int>(j)) = inf;
                continue;
            }
            const double d = dist(i, j);
            double best = inf;
            if (i == 0 && j == 0) best = 0.0;
            if (i > 0 && j > 0)
                best = std::min(best, cost(static_cast<int>(i - 1), static_cast<int>(j - 1)));
            if (i > 0) best = std::min(best, cost(static_cast<int>(i - 1), static_cast<int>(j)));
            if (j > 0) best = std::min(best, cost(static_cast<int>(i), static_cast<int>(j - 1)));
            cost(static_cast<int>(i), static_cast<int>(j)) = best == inf ? inf : best + d;
        }
    }
    if (!std::isfinite(cost(static_cast<int>(n - 1), static_cast<int>(m - 1)))) return std::nullopt;

    // backtrack
    std::size_t i = n - 1, j = m - 1;
    double sum_offset = 0.0;
    std::size_t steps = 0;
    while (true) {
        sum_offset += static_cast<double>(b[j].day - a[i].day);
        ++steps;
        if (i == 0 && j == 0) break;
        const double diag = (i > 0 && j > 0) ? cost(static_cast<int>(i - 1), static_cast<int>(j - 1))
                                             : std::numeric_limits<double>::infinity();
        const double up = i > 0 ? cost(static_cast<int>(i - 1), static_cast<int>(j))
                                : std::numeric_limits<double>::infinity();
        const double left = j > 0 ? cost(static_cast<int>(i), static_cast<int>(j - 1))
                                  : std::numeric_limits<double>::infinity();
        if (diag <= up && diag <= left) {
            --i;
            --j;
        } else if (up < left || (up == left && i > j)) {
            --i;
        } else {
            --j;
        }
    }
    return sum_offset / static_cast<double>(steps);
}

// lexicographic order used to canonicalize argument order so that antisymmetry
// holds exactly
inline bool series_less(const FactionTopicSeries& a, const FactionTopicSeries& b) {
    if (a.day0 != b.day0) return a.day0 < b.day0;
    if (a.w.rows() != b.w.rows()) return a.w.rows() < b.w.rows();
    if (a.w.cols() != b.w.cols()) return a.w.cols() < b.w.cols();
    for (int i = 0; i < a.w.rows(); ++i)
        for (int j = 0; j < a.w.cols(); ++j)
            if (a.w(i, j) != b.w(i, j)) return a.w(i, j) < b.w(i, j);
    return false;
}

}  // namespace dyn_detail

// Rolling-window DTW lead/follow index between two faction series. For each
// window the mean signed alignment offset picks the leader; the follow
// strength clamp(|mean offset| / max_lag, 0, 1) lands on the follower edge
// only. Days whose window has no usable frames on either side are emitted as
// non-evaluable.
inline LeadFollowResult lead_follow(const FactionTopicSeries& series_a,
                                    const FactionTopicSeries& series_b,
                                    const LeadFollowParams& params = {}) {
    if (series_a.day0 != series_b.day0 || series_a.w.rows() != series_b.w.rows())
        throw std::invalid_argument("lead_follow: series not aligned on the same date axis");
    if (params.window < 1 || params.max_lag < 0 || params.shift < 1)
        throw std::invalid_argument("lead_follow: bad parameters");
    if (params.window > series_a.n_days())
        throw std::invalid_argument("lead_follow: window longer than the series");

    // canonical argument order makes fl(B,A) == -fl(A,B) bit-exact
    if (dyn_detail::series_less(series_b, series_a)) {
        LeadFollowResult sw = lead_follow(series_b, series_a, params);
        for (auto& d : sw.days) {
            std::swap(d.f_a_follows_b, d.f_b_follows_a);
            d.fl = -d.fl;
        }
        return sw;
    }

    LeadFollowResult result;
    result.params = params;
    const int T = series_a.n_days();
    for (int x = params.window - 1; x < T; x += params.shift) {
        LeadFollowDay day;
        day.day = series_a.day0 + x;
        std::vector<dyn_detail::Frame> fa, fb;
        for (int t = x - params.window + 1; t <= x; ++t) {
            if (series_a.has_data[static_cast<std::size_t>(t)])
                fa.push_back({series_a.day0 + t, series_a.w.row(t).transpose()});
            if (series_b.has_data[static_cast<std::size_t>(t)])
                fb.push_back({series_b.day0 + t, series_b.w.row(t).transpose()});
        }
        const auto offset = dyn_detail::dtw_mean_offset(fa, fb, params.max_lag);
        if (offset) {
            day.evaluable = true;
            const double f = params.max_lag > 0
                                 ? std::clamp(std::fabs(*offset) / params.max_lag, 0.0, 1.0)
                                 : 0.0;
            if (*offset > 0) {
                day.f_b_follows_a = f;  // A's frames lead B's
            } else if (*offset < 0) {
                day.f_a_follows_b = f;
            }
            day.fl = day.f_b_follows_a - day.f_a_follows_b;
        }
        result.days.push_back(day);
    }
    return result;
}

// ---- weekly top movers --------------------------------------------------------------

struct Mover {
    std::int64_t day = 0;
    FactionLabel faction = FactionLabel::Other;
    int sign = 0;   // +1 or -1
    int rank = 0;   // 1-based within the sign class
    int topic = 0;
    double delta = 0.0;
};

// Per day x >= 7: weekly variations w[x] - w[x-7]; positive and negative
// variations ranked separately by magnitude (ties to the lower topic id);
// days with a zero row at either endpoint are skipped.
inline std::vector<Mover> weekly_movers(const FactionTopicSeries& s, int top_n = 3) {
    if (s.n_days() < 8) throw std::invalid_argument("weekly_movers: series spans fewer than 8 days");
    std::vector<Mover> out;
    const int K = static_cast<int>(s.w.cols());
    for (int x = 7; x < s.n_days(); ++x) {
        if (!s.has_data[static_cast<std::size_t>(x)] || !s.has_data[static_cast<std::size_t>(x - 7)])
            continue;
        std::vector<std::pair<double, int>> pos, neg;
        for (int k = 0; k < K; ++k) {
            const double v = s.w(x, k) - s.w(x - 7, k);
            if (v > 0) pos.push_back({v, k});
            else if (v < 0) neg.push_back({-v, k});
        }
        auto by_magnitude = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        };
        std::sort(pos.begin(), pos.end(), by_magnitude);
        std::sort(neg.begin(), neg.end(), by_magnitude);
        for (int r = 0; r < std::min<int>(top_n, static_cast<int>(pos.size())); ++r)
            out.push_back({s.day0 + x, s.faction, +1, r + 1, pos[static_cast<std::size_t>(r)].second,
                           pos[static_cast<std::size_t>(r)].first});
        for (int r = 0; r < std::min<int>(top_n, static_cast<int>(neg.size())); ++r)
            out.push_back({s.day0 + x, s.faction, -1, r + 1, neg[static_cast<std::size_t>(r)].second,
                           -neg[static_cast<std::size_t>(r)].first});
    }
    return out;
}

}  // namespace rhetorica
