#pragma once

// Central finite-difference checks for the two training objectives.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "citeverify/dense.hpp"
#include "citeverify/verifier.hpp"

namespace gradcheck {

inline double rel_err(double analytic, double numeric) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    if (scale < 1e-9) return std::abs(analytic - numeric);
    return std::abs(analytic - numeric) / scale;
}

struct Result {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

// Compares every entry of every touched projection row. With a shared tower
// the reference gradient is query_grad + passage_grad.
inline Result biencoder(const citeverify::FeatureHashEncoder& query_encoder,
                        const citeverify::FeatureHashEncoder* passage_encoder,
                        std::span<const std::string> queries, std::span<const std::string> passages,
                        double h = 1e-6) {
    using citeverify::contrastive_loss;
    const auto& p_enc = passage_encoder ? *passage_encoder : query_encoder;
    const auto base = contrastive_loss(query_encoder, p_enc, queries, passages);

    Result out;
    auto check_tower = [&](bool query_side, const citeverify::RowGradient& analytic_rows,
                           const citeverify::RowGradient* extra_rows) {
        citeverify::RowGradient rows = analytic_rows;
        if (extra_rows) {
            for (const auto& [r, g] : *extra_rows) {
                auto& dst = rows[r];
                if (dst.empty()) dst.assign(g.size(), 0.0);
                for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
            }
        }
        for (const auto& [row, g] : rows) {
            for (std::size_t c = 0; c < g.size(); ++c) {
                auto eval = [&](double delta) {
                    citeverify::FeatureHashEncoder q = query_encoder;
                    citeverify::FeatureHashEncoder p = p_enc;
                    if (!passage_encoder) {
                        q.projection_row(row)[c] += delta;
                        return contrastive_loss(q, q, queries, passages).loss;
                    }
                    (query_side ? q : p).projection_row(row)[c] += delta;
                    return contrastive_loss(q, p, queries, passages).loss;
                };
                const double numeric = (eval(h) - eval(-h)) / (2 * h);
                out.max_rel_err = std::max(out.max_rel_err, rel_err(g[c], numeric));
                ++out.checked;
            }
        }
    };
    if (passage_encoder) {
        check_tower(true, base.query_grad, nullptr);
        check_tower(false, base.passage_grad, nullptr);
    } else {
        check_tower(true, base.query_grad, &base.passage_grad);
    }
    return out;
}

inline Result listwise(const citeverify::CrossScorer& scorer,
                       const citeverify::FeatureVector& positive,
                       std::span<const citeverify::FeatureVector> negatives, double h = 1e-6) {
    const auto base = citeverify::listwise_loss(scorer, positive, negatives);
    Result out;
    for (std::size_t i = 0; i < citeverify::kFeatureCount; ++i) {
        auto eval = [&](double delta) {
            auto s = scorer;
            s.weights()[i] += delta;
            return citeverify::listwise_loss(s, positive, negatives).loss;
        };
        const double numeric = (eval(h) - eval(-h)) / (2 * h);
        out.max_rel_err = std::max(out.max_rel_err, rel_err(base.gradient[i], numeric));
        ++out.checked;
    }
    return out;
}

}  // namespace gradcheck
