#include "ugcsr/metrics.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ugcsr {

double psnr(const Image& a, const Image& b) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument("psnr: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < a.px.size(); ++i) {
        double d = a.px[i] - b.px[i];
        acc += d * d;
    }
    double mse = acc / static_cast<double>(a.px.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWin = 11;

// 11-tap Gaussian, sigma 1.5, normalized
std::vector<double> ssim_window() {
    std::vector<double> w(kWin);
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        double d = i - (kWin - 1) / 2.0;
        w[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

// valid-region separable filter on one channel plane (h,w)
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::vector<double>& win, int& oh, int& ow) {
    oh = h - kWin + 1;
    ow = w - kWin + 1;
    std::vector<double> tmp(static_cast<size_t>(h) * ow);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += win[k] * plane[y * w + x + k];
            tmp[y * ow + x] = acc;
        }
    std::vector<double> out(static_cast<size_t>(oh) * ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += win[k] * tmp[(y + k) * ow + x];
            out[y * ow + x] = acc;
        }
    return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument("ssim: shape mismatch");
    if (a.h < kWin || a.w < kWin)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;  // K1, K2 squared, L = 1
    std::vector<double> win = ssim_window();
    double total = 0.0;
    size_t count = 0;
    std::vector<double> pa(static_cast<size_t>(a.h) * a.w), pb(pa.size()), paa(pa.size()),
        pbb(pa.size()), pab(pa.size());
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < a.h; ++y)
            for (int x = 0; x < a.w; ++x) {
                size_t i = static_cast<size_t>(y) * a.w + x;
                pa[i] = a.at(y, x, c);
                pb[i] = b.at(y, x, c);
                paa[i] = pa[i] * pa[i];
                pbb[i] = pb[i] * pb[i];
                pab[i] = pa[i] * pb[i];
            }
        int oh, ow;
        auto mu_a = filter_valid(pa, a.h, a.w, win, oh, ow);
        auto mu_b = filter_valid(pb, a.h, a.w, win, oh, ow);
        auto m_aa = filter_valid(paa, a.h, a.w, win, oh, ow);
        auto m_bb = filter_valid(pbb, a.h, a.w, win, oh, ow);
        auto m_ab = filter_valid(pab, a.h, a.w, win, oh, ow);
        for (size_t i = 0; i < mu_a.size(); ++i) {
            double va = m_aa[i] - mu_a[i] * mu_a[i];
            double vb = m_bb[i] - mu_b[i] * mu_b[i];
            double cov = m_ab[i] - mu_a[i] * mu_b[i];
            double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
            double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double perceptual_distance(const Image& a, const Image& b, SemanticExtractor& extractor) {
    if (a.h != b.h || a.w != b.w)
        throw std::invalid_argument("perceptual_distance: shape mismatch");
    SemanticEmbedding ea = extractor.extract(a);
    SemanticEmbedding eb = extractor.extract(b);
    auto normalize_rows = [](Tensor t) {
        for (size_t r = 0; r < t.dim(0); ++r) {
            double n = 0.0;
            for (size_t d = 0; d < t.dim(1); ++d) n += t.at2(r, d) * t.at2(r, d);
            n = std::sqrt(n) + 1e-10;
            for (size_t d = 0; d < t.dim(1); ++d) t.at2(r, d) /= n;
        }
        return t;
    };
    double acc = 0.0;
    for (size_t s = 0; s < ea.scales.size(); ++s)
        acc += normalize_rows(ea.scales[s].features).mse(normalize_rows(eb.scales[s].features));
    return acc / static_cast<double>(ea.scales.size());
}

double wild_score(double musiq, double maniqa, double clipiqa) {
    return 0.1 * musiq + 10.0 * maniqa + 10.0 * clipiqa;
}

double synthetic_score(double psnr_db, double ssim_val, double lpips_val) {
    return psnr_db + 10.0 * ssim_val - 10.0 * lpips_val;
}

std::optional<double> wild_score(const MetricReport& r) {
    if (!r.musiq || !r.maniqa || !r.clipiqa) return std::nullopt;
    return wild_score(*r.musiq, *r.maniqa, *r.clipiqa);
}

std::optional<double> synthetic_score(const MetricReport& r) {
    if (!r.psnr || !r.ssim || !r.lpips) return std::nullopt;
    if (std::isinf(*r.psnr)) return std::nullopt;  // identical pair, score undefined
    return synthetic_score(*r.psnr, *r.ssim, *r.lpips);
}

std::optional<double> combined_score(const MetricReport& r) {
    auto w = wild_score(r);
    auto s = synthetic_score(r);
    if (!w || !s) return std::nullopt;
    return *w + *s;
}

std::optional<NrScores> StubNrIqa::evaluate(const Image& img, const std::string& image_id) {
    uint64_t content = fnv1a(img.px.data(), img.px.size() * sizeof(double));
    Rng rng(hash_combine(content, image_id));
    NrScores s;
    s.musiq = 30.0 + 45.0 * rng.uniform();
    s.maniqa = 0.2 + 0.6 * rng.uniform();
    s.clipiqa = 0.2 + 0.6 * rng.uniform();
    s.nrqm = 3.0 + 5.0 * rng.uniform();
    s.hyperiqa = 0.2 + 0.6 * rng.uniform();
    return s;
}

InjectedMetrics::InjectedMetrics(const std::string& csv_path) {
    for (MetricReport& r : parse_metric_csv(csv_path)) by_id_[r.image_id] = r;
}

std::optional<NrScores> InjectedMetrics::evaluate(const Image&, const std::string& image_id) {
    auto it = by_id_.find(image_id);
    if (it == by_id_.end()) return std::nullopt;
    const MetricReport& r = it->second;
    if (!r.musiq || !r.maniqa || !r.clipiqa) return std::nullopt;
    NrScores s;
    s.musiq = *r.musiq;
    s.maniqa = *r.maniqa;
    s.clipiqa = *r.clipiqa;
    s.nrqm = r.nrqm.value_or(0.0);
    s.hyperiqa = r.hyperiqa.value_or(0.0);
    return s;
}

std::optional<MetricReport> InjectedMetrics::lookup(const std::string& image_id) const {
    auto it = by_id_.find(image_id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

ScoreRow score_report(const MetricReport& r) {
    return {r, wild_score(r), synthetic_score(r), combined_score(r)};
}

namespace {

std::optional<double> mean_of(const std::vector<std::optional<double>>& vals) {
    double acc = 0.0;
    size_t n = 0;
    for (const auto& v : vals)
        if (v && std::isfinite(*v)) {
            acc += *v;
            ++n;
        }
    if (n == 0) return std::nullopt;
    return acc / static_cast<double>(n);
}

}  // namespace

ScoreCard aggregate(const std::vector<MetricReport>& reports) {
    ScoreCard card;
    std::vector<std::optional<double>> w, s, c, psnrs, ssims, lpipss, musiqs, maniqas, clips;
    for (const MetricReport& r : reports) {
        ScoreRow row = score_report(r);
        w.push_back(row.wild);
        s.push_back(row.synthetic);
        c.push_back(row.combined);
        if (r.psnr && std::isinf(*r.psnr)) ++card.psnr_inf_excluded;
        psnrs.push_back(r.psnr);
        ssims.push_back(r.ssim);
        lpipss.push_back(r.lpips);
        musiqs.push_back(r.musiq);
        maniqas.push_back(r.maniqa);
        clips.push_back(r.clipiqa);
        card.rows.push_back(std::move(row));
    }
    card.mean_wild = mean_of(w);
    card.mean_synthetic = mean_of(s);
    card.mean_combined = mean_of(c);
    auto mm = mean_of(musiqs), mma = mean_of(maniqas), mc = mean_of(clips);
    if (mm && mma && mc) card.wild_of_means = wild_score(*mm, *mma, *mc);
    auto mp = mean_of(psnrs), ms = mean_of(ssims), ml = mean_of(lpipss);
    if (mp && ms && ml) card.synthetic_of_means = synthetic_score(*mp, *ms, *ml);
    return card;
}

const char* const kMetricCsvHeader =
    "image_id,psnr,ssim,lpips,musiq,maniqa,clipiqa,nrqm,hyperiqa,"
    "wild_score,synthetic_score,combined_score";

namespace {

std::string field(const std::optional<double>& v) {
    if (!v) return "";
    if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(12);
    os << *v;
    return os.str();
}

std::optional<double> parse_field(const std::string& s) {
    if (s.empty()) return std::nullopt;
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::stod(s);
}

}  // namespace

std::string metric_csv(const ScoreCard& card) {
    std::ostringstream os;
    os << kMetricCsvHeader << "\n";
    auto emit = [&](const std::string& id, const MetricReport* r,
                    const std::optional<double>& w, const std::optional<double>& s,
                    const std::optional<double>& c) {
        os << id << "," << field(r ? r->psnr : std::nullopt) << ","
           << field(r ? r->ssim : std::nullopt) << "," << field(r ? r->lpips : std::nullopt)
           << "," << field(r ? r->musiq : std::nullopt) << ","
           << field(r ? r->maniqa : std::nullopt) << "," << field(r ? r->clipiqa : std::nullopt)
           << "," << field(r ? r->nrqm : std::nullopt) << ","
           << field(r ? r->hyperiqa : std::nullopt) << "," << field(w) << "," << field(s) << ","
           << field(c) << "\n";
    };
    for (const ScoreRow& row : card.rows)
        emit(row.metrics.image_id, &row.metrics, row.wild, row.synthetic, row.combined);
    emit("mean", nullptr, card.mean_wild, card.mean_synthetic, card.mean_combined);
    return os.str();
}

void write_metric_csv(const std::string& path, const ScoreCard& card) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << metric_csv(card);
}

std::vector<MetricReport> parse_metric_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty metric file " + path);
    if (line != kMetricCsvHeader)
        throw std::runtime_error("bad metric header in " + path);
    std::vector<MetricReport> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        cells.resize(12);
        if (cells[0] == "mean") continue;  // aggregate row, recomputed on load
        MetricReport r;
        r.image_id = cells[0];
        r.psnr = parse_field(cells[1]);
        r.ssim = parse_field(cells[2]);
        r.lpips = parse_field(cells[3]);
        r.musiq = parse_field(cells[4]);
        r.maniqa = parse_field(cells[5]);
        r.clipiqa = parse_field(cells[6]);
        r.nrqm = parse_field(cells[7]);
        r.hyperiqa = parse_field(cells[8]);
        r.source = MetricReport::Source::injected;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace ugcsr
