#pragma once

#include <span>
#include <string>
#include <vector>

namespace bankruin {

// ROC / precision-recall sweep over one score vector. Points use the strict
// score > threshold convention, one point per distinct score plus a terminal
// -inf point, so the ROC runs (0,0) -> (1,1) and each point reproduces
// confusion_at_cutoff at its threshold.
struct ClassificationCurve {
    struct Point {
        double threshold;
        double tpr;
        double fpr;
        double precision;
        double recall;
    };
    std::vector<Point> points;
    double auc = 0.0;
    double pr_auc = 0.0;
    double base_rate = 0.0;
    long n_pos = 0;
    long n_neg = 0;

    double pr_auc_to_base_rate() const { return pr_auc / base_rate; }
    std::string points_csv(char delim = ',') const;
};

// Rank-based AUC: probability a random positive outranks a random negative,
// ties counted one half. Single sort; exact integer pair counting. Requires
// both classes.
ClassificationCurve roc_and_auc(std::span<const double> scores, std::span<const int> labels);

// PR-AUC by step interpolation of precision over the recall sweep (average
// precision). Requires at least one positive.
ClassificationCurve pr_curve(std::span<const double> scores, std::span<const int> labels);

struct ConfusionRates {
    double tpr;
    double fpr;
    double tnr;
    double fnr;
};

// Classifies score > cutoff as a predicted failure (strict).
ConfusionRates confusion_at_cutoff(std::span<const double> scores, std::span<const int> labels,
                                   double cutoff);

}  // namespace bankruin
