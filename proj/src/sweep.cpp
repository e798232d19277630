#include "ugcsr/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace fs = std::filesystem;

namespace ugcsr {

using nlohmann::json;

SweepGrid load_sweep_grid(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("sweep: cannot read " + path);
    json j = json::parse(f);
    for (const auto& [key, _] : j.items())
        if (key != "axes") throw std::invalid_argument("sweep: unknown key \"" + key + "\"");
    if (!j.contains("axes") || !j.at("axes").is_object())
        throw std::invalid_argument("sweep: grid needs an \"axes\" object");
    SweepGrid grid;
    for (const auto& [axis, vals] : j.at("axes").items()) {
        std::vector<std::string> values;
        for (const auto& v : vals)
            values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        if (values.empty()) throw std::invalid_argument("sweep: empty axis " + axis);
        grid.axes.emplace_back(axis, std::move(values));
    }
    if (grid.axes.empty()) throw std::invalid_argument("sweep: no axes");
    return grid;
}

std::string SweepPoint::label() const {
    std::string s;
    for (const auto& [axis, value] : settings) {
        if (!s.empty()) s += ";";
        s += axis + "=" + value;
    }
    return s;
}

std::vector<SweepPoint> enumerate_grid(const SweepGrid& grid) {
    std::vector<SweepPoint> points{SweepPoint{}};
    for (const auto& [axis, values] : grid.axes) {
        std::vector<SweepPoint> next;
        for (const SweepPoint& p : points)
            for (const std::string& v : values) {
                SweepPoint q = p;
                q.settings.emplace_back(axis, v);
                next.push_back(std::move(q));
            }
        points = std::move(next);
    }
    return points;
}

SamplerConfig apply_point(SamplerConfig base, const SweepPoint& point) {
    for (const auto& [axis, value] : point.settings) {
        if (axis == "guidance_scale") {
            base.guidance_scale = std::stod(value);
        } else if (axis == "start_point") {
            if (value == "noise") base.start_point = StartPoint::noise;
            else if (value == "lr") base.start_point = StartPoint::lr;
            else throw std::invalid_argument("sweep: bad start_point " + value);
        } else if (axis == "prompt_set") {
            SamplerConfig wild = wild_preset();
            if (value == "none") {
                base.positive_prompt.clear();
                base.negative_prompt.clear();
            } else if (value == "positive") {
                base.positive_prompt = wild.positive_prompt;
                base.negative_prompt.clear();
            } else if (value == "negative") {
                base.positive_prompt.clear();
                base.negative_prompt = wild.negative_prompt;
            } else {
                throw std::invalid_argument("sweep: bad prompt_set " + value);
            }
        } else {
            throw std::invalid_argument("sweep: unknown axis " + axis);
        }
    }
    return base;
}

namespace {

SweepPointResult eval_point(const SweepPoint& point, const SamplerConfig& base,
                            const std::vector<std::pair<std::string, Image>>& images,
                            SamplerModels local, const NoiseSchedule& sched, NrIqaPlugin* nr,
                            const std::string& inject_dir) {
    SweepPointResult res;
    res.point = point;
    try {
        if (!inject_dir.empty()) {
            std::string file = inject_dir + "/" + point.label() + ".csv";
            res.card = aggregate(parse_metric_csv(file));
            return res;
        }
        SamplerConfig cfg = apply_point(base, point);
        std::vector<MetricReport> reports;
        for (const auto& [id, lr] : images) {
            Image sr = sample(cfg, lr, local, sched);
            MetricReport r;
            r.image_id = id;
            if (nr) {
                if (auto s = nr->evaluate(sr, id)) {
                    r.musiq = s->musiq;
                    r.maniqa = s->maniqa;
                    r.clipiqa = s->clipiqa;
                    r.nrqm = s->nrqm;
                    r.hyperiqa = s->hyperiqa;
                }
            }
            reports.push_back(std::move(r));
        }
        res.card = aggregate(reports);
    } catch (const std::exception& e) {
        res.failed = true;
        res.error = e.what();
    }
    return res;
}

}  // namespace

SweepResult run_sweep(const SweepGrid& grid, const SamplerConfig& base,
                      const std::vector<std::pair<std::string, Image>>& images,
                      const SamplerModels& models, const NoiseSchedule& sched,
                      NrIqaPlugin* nr, const std::string& inject_dir, size_t workers) {
    std::vector<SweepPoint> points = enumerate_grid(grid);
    SweepResult result;
    result.points.resize(points.size());
    workers = std::max<size_t>(1, std::min(workers, points.size()));
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            // private clones: forward passes cache state inside the models
            Autoencoder vae = *models.autoencoder;
            Denoiser den = *models.denoiser;
            SemanticExtractor ext = *models.extractor;
            SamplerModels local{&vae, &den, &ext};
            for (size_t i = w; i < points.size(); i += workers)
                result.points[i] =
                    eval_point(points[i], base, images, local, sched, nr, inject_dir);
        });
    for (auto& t : pool) t.join();
    return result;
}

void write_sweep_csv(const std::string& path, const SweepResult& result) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("sweep: cannot write " + path);
    f << "point," << kMetricCsvHeader << "\n";
    for (const SweepPointResult& p : result.points) {
        if (p.failed) {
            f << p.point.label() << ",error,,,,,,,,,,,\n";
            continue;
        }
        std::string csv = metric_csv(p.card);
        // re-emit the per-card rows with the point label prepended
        size_t start = csv.find('\n') + 1;
        while (start < csv.size()) {
            size_t end = csv.find('\n', start);
            f << p.point.label() << "," << csv.substr(start, end - start) << "\n";
            start = end + 1;
        }
    }
}

namespace {

void draw_line(Image& img, int x0, int y0, int x1, int y1, double r, double g, double b) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1, err = dx + dy;
    while (true) {
        if (y0 >= 0 && y0 < img.h && x0 >= 0 && x0 < img.w) {
            img.at(y0, x0, 0) = r;
            img.at(y0, x0, 1) = g;
            img.at(y0, x0, 2) = b;
        }
        if (x0 == x1 && y0 == y1) break;
        int e2 = 2 * err;
        if (e2 >= dy) { err += dy; x0 += sx; }
        if (e2 <= dx) { err += dx; y0 += sy; }
    }
}

std::optional<double> point_score(const SweepPointResult& p) {
    if (p.failed) return std::nullopt;
    if (p.card.mean_combined) return p.card.mean_combined;
    if (p.card.mean_wild) return p.card.mean_wild;
    return p.card.mean_synthetic;
}

}  // namespace

void write_sweep_plots(const std::string& out_dir, const SweepGrid& grid,
                       const SweepResult& result) {
    fs::create_directories(out_dir);
    for (const auto& [axis, values] : grid.axes) {
        if (values.size() < 2) continue;
        // average the aggregate score across points sharing each axis value
        std::vector<double> ys;
        for (const std::string& v : values) {
            double acc = 0.0;
            size_t n = 0;
            for (const SweepPointResult& p : result.points)
                for (const auto& [a, pv] : p.point.settings)
                    if (a == axis && pv == v)
                        if (auto s = point_score(p)) {
                            acc += *s;
                            ++n;
                        }
            ys.push_back(n ? acc / static_cast<double>(n) : std::nan(""));
        }
        double lo = 1e300, hi = -1e300;
        for (double y : ys)
            if (std::isfinite(y)) {
                lo = std::min(lo, y);
                hi = std::max(hi, y);
            }
        if (hi < lo) { lo = 0.0; hi = 1.0; }
        if (hi - lo < 1e-12) { lo -= 0.5; hi += 0.5; }
        const int W = 320, H = 240, M = 30;
        Image plot(H, W);
        std::fill(plot.px.begin(), plot.px.end(), 1.0);
        draw_line(plot, M, H - M, W - M, H - M, 0, 0, 0);
        draw_line(plot, M, M, M, H - M, 0, 0, 0);
        int px = -1, py = -1;
        for (size_t i = 0; i < ys.size(); ++i) {
            if (!std::isfinite(ys[i])) continue;
            int x = M + static_cast<int>((W - 2.0 * M) * static_cast<double>(i) /
                                         static_cast<double>(ys.size() - 1));
            int y = H - M - static_cast<int>((H - 2.0 * M) * (ys[i] - lo) / (hi - lo));
            for (int d = -1; d <= 1; ++d) {
                draw_line(plot, x - 2, y + d, x + 2, y + d, 0.1, 0.2, 0.8);
            }
            if (px >= 0) draw_line(plot, px, py, x, y, 0.1, 0.2, 0.8);
            px = x;
            py = y;
        }
        save_png(plot, out_dir + "/sweep_" + axis + ".png");
    }
}

}  // namespace ugcsr
