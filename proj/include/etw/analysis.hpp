#pragma once

// Hand-map rates, heatmaps and the statistical tests used on study logs.

#include <iosfwd>
#include <string>
#include <vector>

#include "etw/handmap.hpp"
#include "etw/perceiver.hpp"

namespace etw::analysis {

// Percent of the painted (non-background) cells lying in `region`.
// Throws EmptyMask / DimensionMismatch.
double in_region_rate(const Mask& mask, Region region, const HandMap& map);

struct CellPoint {
    double x = 0.0;
    double y = 0.0;
};

struct Heatmap {
    int width = 0;
    int height = 0;
    std::vector<int> counts;        // row-major, reports covering each cell
    std::vector<Cell> strongest;    // one per report ("black dots")
    CellPoint mean_strongest;       // mean strongest point, cell units ("white dot")
    std::size_t reports = 0;

    int at(Cell c) const { return counts[static_cast<std::size_t>(c.y) * width + c.x]; }
    int max_count() const;
};

// Throws Argument for an empty report list and DimensionMismatch for mixed sizes.
Heatmap aggregate_heatmap(const std::vector<SensationReport>& reports);
void write_heatmap_csv(std::ostream& out, const Heatmap& h);
// Linear count scale over the hand outline; black dots per report, white dot at the mean.
std::string heatmap_svg(const Heatmap& h, const HandMap& map, const std::string& title);

// Fraction (0..1) of reports whose strongest point lies in `region`.
double strongest_point_rate(const std::vector<SensationReport>& reports, Region region, const HandMap& map);

struct FTest {
    double ss = 0.0;        // effect sum of squares
    double ss_error = 0.0;  // effect x subject sum of squares
    double df1 = 0.0;
    double df2 = 0.0;
    double F = 0.0;
    double p = 1.0;
    double partial_eta2 = 0.0;
    double gg_epsilon = 1.0;
    double p_gg = 1.0;  // Greenhouse-Geisser corrected

    double p_reported(bool greenhouse_geisser) const { return greenhouse_geisser ? p_gg : p; }
};

struct Mauchly {
    double W = 1.0;
    double chi2 = 0.0;
    int df = 0;
    double p = 1.0;
    bool sphericity_holds(double alpha = 0.05) const { return p >= alpha; }
};

struct PairedT {
    int i = 0;
    int j = 0;
    double mean_diff = 0.0;
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    double p_bonferroni = 1.0;
};

struct RmAnovaOptions {
    bool greenhouse_geisser = false;  // report corrected p-values
};

struct RmAnovaResult {
    int subjects = 0;
    int levels_a = 0;
    int levels_b = 0;
    FTest a;
    FTest b;
    FTest ab;
    Mauchly mauchly_a;
    Mauchly mauchly_b;
    Mauchly mauchly_ab;
    std::vector<PairedT> pairwise_a;  // over the A marginals, Bonferroni corrected
    double ss_total = 0.0;
    double ss_subjects = 0.0;
    bool greenhouse_geisser = false;

    // Sum of every component; equals ss_total up to rounding.
    double ss_components() const;
};

// data[subject][a][b]. Balanced, complete, >= 2 subjects and >= 2 levels per factor.
// Throws Design otherwise.
RmAnovaResult rm_anova_2way(const std::vector<std::vector<std::vector<double>>>& data,
                            const RmAnovaOptions& options = {});

// Mauchly's test on the columns of a subjects x k matrix (k repeated levels).
Mauchly mauchly(const std::vector<std::vector<double>>& levels);

// Two-tailed paired t. Zero-variance differences give t = 0, p = 1 when the
// mean difference is zero and t = +-inf, p = 0 otherwise.
PairedT paired_t(const std::vector<double>& x, const std::vector<double>& y);

struct TTest {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

enum class Variance { Pooled, Welch };

// Two-tailed. Throws DegenerateVariance for n < 2 or when both samples have zero variance
// (unless identical means, which yields t = 0, p = 1).
TTest unpaired_t(const std::vector<double>& x, const std::vector<double>& y, Variance variance = Variance::Pooled);

struct WilcoxonResult {
    double w_plus = 0.0;  // rank sum of positive differences x - y
    double w_minus = 0.0;
    int n = 0;            // non-zero differences
    double z = 0.0;       // normal approximation for W+, tie corrected
    double p = 1.0;
};

// Throws TooFewDifferences when fewer than 5 non-zero differences remain.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y);

// Descriptives used in the report tables.
double mean(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);

}  // namespace etw::analysis
