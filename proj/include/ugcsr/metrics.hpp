#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ugcsr/extractor.hpp"
#include "ugcsr/image.hpp"

namespace ugcsr {

// One image's metrics. Absent fields mean "not computed / not available";
// psnr may be +inf for identical images.
struct MetricReport {
    enum class Source { computed, injected };

    std::string image_id;
    std::optional<double> psnr, ssim, lpips;
    std::optional<double> musiq, maniqa, clipiqa, nrqm, hyperiqa;
    Source source = Source::computed;
};

double psnr(const Image& a, const Image& b);  // dB, +inf when identical
double ssim(const Image& a, const Image& b);  // 11-tap Gaussian window

// Deterministic LPIPS stand-in: channel-normalized multi-scale feature MSE
// over the frozen semantic extractor. Symmetric, zero at identity.
double perceptual_distance(const Image& a, const Image& b, SemanticExtractor& extractor);

// challenge formulas
double wild_score(double musiq, double maniqa, double clipiqa);
double synthetic_score(double psnr_db, double ssim_val, double lpips_val);

std::optional<double> wild_score(const MetricReport& r);
std::optional<double> synthetic_score(const MetricReport& r);  // absent on +inf psnr
std::optional<double> combined_score(const MetricReport& r);

// No-reference IQA source. The real networks are out of scope; built-ins are
// a deterministic stub and CSV injection of externally computed values.
struct NrScores {
    double musiq = 0, maniqa = 0, clipiqa = 0, nrqm = 0, hyperiqa = 0;
};

class NrIqaPlugin {
public:
    virtual ~NrIqaPlugin() = default;
    // nullopt = plugin failure; the caller records absent metrics
    virtual std::optional<NrScores> evaluate(const Image& img, const std::string& image_id) = 0;
};

// Hash-derived pseudo-scores in plausible ranges; content- and id-stable.
class StubNrIqa : public NrIqaPlugin {
public:
    std::optional<NrScores> evaluate(const Image& img, const std::string& image_id) override;
};

// Values read from a metric CSV keyed by image_id (same header as output).
class InjectedMetrics : public NrIqaPlugin {
public:
    explicit InjectedMetrics(const std::string& csv_path);
    std::optional<NrScores> evaluate(const Image& img, const std::string& image_id) override;
    std::optional<MetricReport> lookup(const std::string& image_id) const;

private:
    std::map<std::string, MetricReport> by_id_;
};

struct ScoreRow {
    MetricReport metrics;
    std::optional<double> wild, synthetic, combined;
};

struct ScoreCard {
    std::vector<ScoreRow> rows;
    // canonical aggregate: mean of per-image scores
    std::optional<double> mean_wild, mean_synthetic, mean_combined;
    // alternative reading: formulas applied to per-metric means
    std::optional<double> wild_of_means, synthetic_of_means;
    size_t psnr_inf_excluded = 0;  // identical-image rows dropped from psnr means
};

ScoreRow score_report(const MetricReport& r);
ScoreCard aggregate(const std::vector<MetricReport>& reports);

extern const char* const kMetricCsvHeader;
std::string metric_csv(const ScoreCard& card);  // per-image rows + "mean" row
void write_metric_csv(const std::string& path, const ScoreCard& card);
std::vector<MetricReport> parse_metric_csv(const std::string& path);

}  // namespace ugcsr
