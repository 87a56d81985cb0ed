#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "amad/config.hpp"
#include "amad/errors.hpp"

namespace amad {

struct ScoredItem {
    double score = 0.0;
    bool anomalous = false;
};

namespace detail {

inline void require_both_classes(std::span<const ScoredItem> items, const char* who) {
    std::size_t pos = 0;
    for (const auto& it : items)
        if (it.anomalous) ++pos;
    if (pos == 0 || pos == items.size())
        throw EvalError(std::string(who) + ": need both classes present");
}

}  // namespace detail

/// Probability that a random anomalous score exceeds a random normal one,
/// ties counted one half (Mann-Whitney; equals the trapezoidal ROC area).
inline double auroc(std::span<const ScoredItem> items) {
    detail::require_both_classes(items, "auroc");
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return items[a].score < items[b].score; });
    double rank_sum_pos = 0.0;
    std::size_t n_pos = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && items[order[j]].score == items[order[i]].score) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based tie average
        for (std::size_t k = i; k < j; ++k)
            if (items[order[k]].anomalous) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = items.size() - n_pos;
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Threshold maximizing Youden's J = sensitivity + specificity - 1 over the
/// midpoints between consecutive distinct scores plus guards beyond both ends.
/// Prediction rule everywhere: anomalous iff score > threshold. Ties on J go
/// to the larger threshold (fewer predicted positives).
inline double optimal_threshold(std::span<const ScoredItem> items) {
    detail::require_both_classes(items, "optimal_threshold");
    std::vector<ScoredItem> sorted(items.begin(), items.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const ScoredItem& a, const ScoredItem& b) { return a.score < b.score; });
    std::size_t total_pos = 0;
    for (const auto& it : sorted)
        if (it.anomalous) ++total_pos;
    const std::size_t total_neg = sorted.size() - total_pos;

    // walk candidates in ascending order, moving score groups below the split
    double best_j = -2.0, best_thr = sorted.front().score - 1.0;
    std::size_t pos_below = 0, neg_below = 0, i = 0;
    auto consider = [&](double thr) {
        const double tpr = static_cast<double>(total_pos - pos_below) / total_pos;
        const double tnr = static_cast<double>(neg_below) / total_neg;
        const double j = tpr + tnr - 1.0;
        if (j >= best_j) {
            best_j = j;
            best_thr = thr;
        }
    };
    consider(sorted.front().score - 1.0);
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].score == sorted[i].score) ++j;
        for (std::size_t k = i; k < j; ++k) {
            if (sorted[k].anomalous) ++pos_below;
            else ++neg_below;
        }
        const double thr = j < sorted.size() ? 0.5 * (sorted[i].score + sorted[j].score)
                                             : sorted.back().score + 1.0;
        consider(thr);
        i = j;
    }
    return best_thr;
}

struct EvalReport {
    double auroc = 0.0;
    double optimal_threshold = 0.0;
    double accuracy = 0.0;
    double f1_macro = 0.0;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::string f1_zero_note;  // set when the zero-F1 convention fired

    void write(std::ostream& out, const std::string& prefix) const {
        out << prefix << "count=" << (tp + fp + tn + fn) << '\n'
            << prefix << "auroc=" << format_double(auroc) << '\n'
            << prefix << "optimal_threshold=" << format_double(optimal_threshold) << '\n'
            << prefix << "accuracy=" << format_double(accuracy) << '\n'
            << prefix << "f1_macro=" << format_double(f1_macro) << '\n'
            << prefix << "tp=" << tp << '\n'
            << prefix << "fp=" << fp << '\n'
            << prefix << "tn=" << tn << '\n'
            << prefix << "fn=" << fn << '\n';
        if (!f1_zero_note.empty()) out << prefix << "note=" << f1_zero_note << '\n';
    }
};

/// Confusion counts and derived metrics at a fixed threshold. The anomalous
/// class is the positive one; a class with neither predictions nor members
/// contributes F1 = 0 and is noted in the report.
inline EvalReport classify_and_report(std::span<const ScoredItem> items, double threshold) {
    EvalReport r;
    r.optimal_threshold = threshold;
    for (const auto& it : items) {
        const bool predicted = it.score > threshold;
        if (predicted && it.anomalous) ++r.tp;
        else if (predicted && !it.anomalous) ++r.fp;
        else if (!predicted && !it.anomalous) ++r.tn;
        else ++r.fn;
    }
    const double n = static_cast<double>(items.size());
    r.accuracy = n > 0 ? static_cast<double>(r.tp + r.tn) / n : 0.0;

    auto f1_of = [&](std::size_t tp, std::size_t fp, std::size_t fn, const char* name) {
        if (2 * tp + fp + fn == 0) {
            r.f1_zero_note = std::string("f1_zero_convention_applied:") + name;
            return 0.0;
        }
        return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    };
    const double f1_anomalous = f1_of(r.tp, r.fp, r.fn, "anomalous");
    const double f1_normal = f1_of(r.tn, r.fn, r.fp, "normal");
    r.f1_macro = 0.5 * (f1_anomalous + f1_normal);
    return r;
}

/// The reporting order: AUROC first, then the threshold, then the counts.
inline EvalReport evaluate(std::span<const ScoredItem> items) {
    const double area = auroc(items);
    const double thr = optimal_threshold(items);
    EvalReport r = classify_and_report(items, thr);
    r.auroc = area;
    return r;
}

}  // namespace amad
