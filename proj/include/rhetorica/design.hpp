#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rhetorica/extract.hpp"

namespace rhetorica {

// ---- B-spline basis -----------------------------------------------------------

// Clamped B-spline basis with `df` functions over [0,1] (cubic when df >= 4,
// degree df-1 below that). Rows are a partition of unity.
inline std::vector<double> bspline_basis(double t, int df) {
    if (df < 1) throw std::runtime_error("bspline_basis: df must be >= 1");
    const int degree = std::min(3, df - 1);
    const int n_interior = df - degree - 1;
    std::vector<double> knots;
    for (int i = 0; i <= degree; ++i) knots.push_back(0.0);
    for (int i = 1; i <= n_interior; ++i)
        knots.push_back(static_cast<double>(i) / (n_interior + 1));
    for (int i = 0; i <= degree; ++i) knots.push_back(1.0);

    t = std::clamp(t, 0.0, 1.0);
    const int m = static_cast<int>(knots.size()) - 1;
    // Cox-de Boor, degree 0 seeds; the right endpoint belongs to the last span
    std::vector<double> b(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
        if ((t >= knots[i] && t < knots[i + 1]) ||
            (t >= 1.0 && knots[i] < 1.0 && knots[i + 1] >= 1.0))
            b[static_cast<std::size_t>(i)] = 1.0;
    }
    for (int d = 1; d <= degree; ++d) {
        for (int i = 0; i + d < m; ++i) {
            double left = 0.0, right = 0.0;
            const double den1 = knots[i + d] - knots[i];
            const double den2 = knots[i + d + 1] - knots[i + 1];
            if (den1 > 0) left = (t - knots[i]) / den1 * b[static_cast<std::size_t>(i)];
            if (den2 > 0)
                right = (knots[i + d + 1] - t) / den2 * b[static_cast<std::size_t>(i + 1)];
            b[static_cast<std::size_t>(i)] = left + right;
        }
    }
    b.resize(static_cast<std::size_t>(df));
    return b;
}

// ---- covariate design -----------------------------------------------------------

struct CovariateDesign {
    Eigen::MatrixXd X;                      // D x P
    std::vector<std::string> col_names;
    std::vector<int> y;                     // content-covariate level per doc
    std::vector<std::string> y_levels;      // {"Brexiteer","Remainer","Other"}
    std::vector<std::int64_t> day;          // per-doc day index
    std::vector<int> faction;               // per-doc faction (enum value)
    std::int64_t day_min = 0;
    std::int64_t day_max = 0;
    int spline_df = 0;                      // 0 when replaced by intercept-only
    std::vector<std::string> warnings;

    int n_docs() const { return static_cast<int>(X.rows()); }
    int n_cols() const { return static_cast<int>(X.cols()); }

    int col(const std::string& name) const {
        for (std::size_t i = 0; i < col_names.size(); ++i)
            if (col_names[i] == name) return static_cast<int>(i);
        return -1;
    }
};

inline int faction_level_index(FactionLabel f) {
    switch (f) {
        case FactionLabel::Brexiteer: return 0;
        case FactionLabel::Remainer: return 1;
        default: return 2;
    }
}

// Design for "rel.type + neg + fct + s(t)": intercept, rel.type dummies
// (ref Causation), neg dummy, fct dummies (ref Other), spline basis over the
// normalized day range. Content covariate Y is the faction level.
inline CovariateDesign build_design(const std::vector<RelationTriplet>& triplets,
                                    int spline_df = 10) {
    if (triplets.empty()) throw std::runtime_error("build_design: no documents");
    CovariateDesign d;
    d.y_levels = {"Brexiteer", "Remainer", "Other"};
    d.day_min = triplets.front().day;
    d.day_max = triplets.front().day;
    for (const auto& t : triplets) {
        d.day_min = std::min(d.day_min, t.day);
        d.day_max = std::max(d.day_max, t.day);
    }
    const bool single_day = d.day_max == d.day_min;
    if (single_day && spline_df > 0) {
        d.warnings.push_back("single-day corpus: spline replaced by intercept-only");
        spline_df = 0;
    }
    d.spline_df = spline_df;

    d.col_names = {"intercept", "rel_type=Creation", "rel_type=Destruction", "neg=TRUE",
                   "fct=Brexiteer", "fct=Remainer"};
    for (int s = 1; s <= spline_df; ++s) d.col_names.push_back("s(t)" + std::to_string(s));

    const int D = static_cast<int>(triplets.size());
    const int P = static_cast<int>(d.col_names.size());
    d.X.setZero(D, P);
    d.y.resize(triplets.size());
    d.day.resize(triplets.size());
    d.faction.resize(triplets.size());
    for (int i = 0; i < D; ++i) {
        const auto& t = triplets[static_cast<std::size_t>(i)];
        d.X(i, 0) = 1.0;
        if (t.rel_type == RelType::Creation) d.X(i, 1) = 1.0;
        if (t.rel_type == RelType::Destruction) d.X(i, 2) = 1.0;
        if (t.negated) d.X(i, 3) = 1.0;
        if (t.faction == FactionLabel::Brexiteer) d.X(i, 4) = 1.0;
        if (t.faction == FactionLabel::Remainer) d.X(i, 5) = 1.0;
        if (spline_df > 0) {
            const double u = static_cast<double>(t.day - d.day_min) /
                             static_cast<double>(d.day_max - d.day_min);
            const auto basis = bspline_basis(u, spline_df);
            for (int s = 0; s < spline_df; ++s) d.X(i, 6 + s) = basis[static_cast<std::size_t>(s)];
        }
        d.y[static_cast<std::size_t>(i)] = faction_level_index(t.faction);
        d.day[static_cast<std::size_t>(i)] = t.day;
        d.faction[static_cast<std::size_t>(i)] = faction_level_index(t.faction);
    }

    for (int j = 1; j < P; ++j) {
        const double v = (d.X.col(j).array() - d.X.col(j).mean()).matrix().squaredNorm();
        if (v == 0.0) d.warnings.push_back("constant design column: " + d.col_names[static_cast<std::size_t>(j)]);
    }
    return d;
}

// Row-subset of a design (used for heldout splits).
inline CovariateDesign subset_design(const CovariateDesign& d, const std::vector<int>& rows) {
    CovariateDesign out;
    out.col_names = d.col_names;
    out.y_levels = d.y_levels;
    out.day_min = d.day_min;
    out.day_max = d.day_max;
    out.spline_df = d.spline_df;
    out.X.resize(static_cast<int>(rows.size()), d.X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.X.row(static_cast<int>(i)) = d.X.row(rows[i]);
        out.y.push_back(d.y[static_cast<std::size_t>(rows[i])]);
        out.day.push_back(d.day[static_cast<std::size_t>(rows[i])]);
        out.faction.push_back(d.faction[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

}  // namespace rhetorica
