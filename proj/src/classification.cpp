#include "bankruin/classification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "bankruin/common.hpp"

namespace bankruin {
namespace {

struct Sweep {
    long n_pos = 0;
    long n_neg = 0;
    // cumulative (tp, fp) after each distinct-score group, descending scores
    struct Group {
        double score;
        long tp;
        long fp;
    };
    std::vector<Group> groups;
    // exact pair counts for the rank AUC
    std::int64_t concordant = 0;
    std::int64_t tied = 0;
};

Sweep sweep_scores(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw UsageError("scores and labels differ in length");
    if (scores.empty()) throw DataError("no observations to score");
    for (double s : scores) {
        if (std::isnan(s)) throw DataError("NaN score");
    }

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    Sweep sw;
    for (int label : labels) {
        if (label == 1) ++sw.n_pos;
        else if (label == 0) ++sw.n_neg;
        else throw DataError("labels must be 0/1");
    }

    long tp = 0, fp = 0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        long pos_here = 0, neg_here = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (labels[order[j]] == 1) ++pos_here;
            else ++neg_here;
            ++j;
        }
        // negatives ranked strictly below this tie group
        std::int64_t neg_below = sw.n_neg - fp - neg_here;
        sw.concordant += static_cast<std::int64_t>(pos_here) * neg_below;
        sw.tied += static_cast<std::int64_t>(pos_here) * neg_here;
        tp += pos_here;
        fp += neg_here;
        sw.groups.push_back({scores[order[i]], tp, fp});
        i = j;
    }
    return sw;
}

void fill_points(ClassificationCurve& curve, const Sweep& sw) {
    curve.n_pos = sw.n_pos;
    curve.n_neg = sw.n_neg;
    curve.base_rate = static_cast<double>(sw.n_pos) / static_cast<double>(sw.n_pos + sw.n_neg);

    auto rates = [&](long tp, long fp) {
        ClassificationCurve::Point p{};
        p.tpr = sw.n_pos > 0 ? static_cast<double>(tp) / sw.n_pos : 0.0;
        p.fpr = sw.n_neg > 0 ? static_cast<double>(fp) / sw.n_neg : 0.0;
        p.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
        p.recall = p.tpr;
        return p;
    };

    curve.points.clear();
    curve.points.reserve(sw.groups.size() + 1);
    long tp_prev = 0, fp_prev = 0;
    for (const auto& g : sw.groups) {
        auto p = rates(tp_prev, fp_prev);  // strict >: excludes the tie group at g.score
        p.threshold = g.score;
        curve.points.push_back(p);
        tp_prev = g.tp;
        fp_prev = g.fp;
    }
    auto last = rates(tp_prev, fp_prev);
    last.threshold = -std::numeric_limits<double>::infinity();
    curve.points.push_back(last);
}

double average_precision(const ClassificationCurve& curve) {
    double ap = 0.0;
    double prev_recall = 0.0;
    for (const auto& p : curve.points) {
        ap += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    return ap;
}

}  // namespace

std::string ClassificationCurve::points_csv(char delim) const {
    std::string out = "threshold";
    out += delim;
    out += "fpr";
    out += delim;
    out += "tpr";
    out += delim;
    out += "precision";
    out += delim;
    out += "recall";
    out += '\n';
    for (const auto& p : points) {
        out += std::isinf(p.threshold) ? "-inf" : format_double(p.threshold);
        out += delim;
        out += format_double(p.fpr);
        out += delim;
        out += format_double(p.tpr);
        out += delim;
        out += format_double(p.precision);
        out += delim;
        out += format_double(p.recall);
        out += '\n';
    }
    return out;
}

ClassificationCurve roc_and_auc(std::span<const double> scores, std::span<const int> labels) {
    Sweep sw = sweep_scores(scores, labels);
    if (sw.n_pos == 0 || sw.n_neg == 0) {
        throw DataError("AUC undefined: labels contain a single class");
    }
    ClassificationCurve curve;
    fill_points(curve, sw);
    curve.auc = (static_cast<double>(sw.concordant) + 0.5 * static_cast<double>(sw.tied)) /
                (static_cast<double>(sw.n_pos) * static_cast<double>(sw.n_neg));
    curve.pr_auc = average_precision(curve);
    return curve;
}

ClassificationCurve pr_curve(std::span<const double> scores, std::span<const int> labels) {
    Sweep sw = sweep_scores(scores, labels);
    if (sw.n_pos == 0) throw DataError("PR curve undefined: no positive labels");
    ClassificationCurve curve;
    fill_points(curve, sw);
    curve.pr_auc = average_precision(curve);
    curve.auc = sw.n_neg > 0
                    ? (static_cast<double>(sw.concordant) + 0.5 * static_cast<double>(sw.tied)) /
                          (static_cast<double>(sw.n_pos) * static_cast<double>(sw.n_neg))
                    : std::numeric_limits<double>::quiet_NaN();
    return curve;
}

ConfusionRates confusion_at_cutoff(std::span<const double> scores, std::span<const int> labels,
                                   double cutoff) {
    if (scores.size() != labels.size()) throw UsageError("scores and labels differ in length");
    long tp = 0, fp = 0, n_pos = 0, n_neg = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        bool predicted = scores[i] > cutoff;
        if (labels[i] == 1) {
            ++n_pos;
            tp += predicted;
        } else if (labels[i] == 0) {
            ++n_neg;
            fp += predicted;
        } else {
            throw DataError("labels must be 0/1");
        }
    }
    ConfusionRates r{};
    r.tpr = n_pos > 0 ? static_cast<double>(tp) / n_pos : 0.0;
    r.fpr = n_neg > 0 ? static_cast<double>(fp) / n_neg : 0.0;
    r.tnr = 1.0 - r.fpr;
    r.fnr = 1.0 - r.tpr;
    return r;
}

}  // namespace bankruin
