#include "sftgen/ablation/ablation.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sftgen/common/error.hpp"
#include "sftgen/common/parallel.hpp"
#include "sftgen/generation/context.hpp"
#include "sftgen/quality/quality.hpp"

namespace sftgen::ablation {

namespace {

std::string alpha_label(double a) { return fmt::format("{:.2f}", a); }

std::string num(double v) { return fmt::format("{:.2f}", v); }

/// Linear blend from a pale to a dark blue.
std::string shade(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const auto ch = [t](int lo, int hi) { return static_cast<int>(std::lround(lo + (hi - lo) * t)); };
    return fmt::format("#{:02x}{:02x}{:02x}", ch(239, 33), ch(243, 102), ch(255, 172));
}

std::size_t index_of(const std::vector<double>& v, double x) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (std::abs(v[i] - x) < 1e-9) return i;
    }
    throw ValidationError(fmt::format("ablation: alpha {} is not on the grid", x));
}

std::size_t index_of(const std::vector<std::size_t>& v, std::size_t x) {
    const auto it = std::find(v.begin(), v.end(), x);
    if (it == v.end()) throw ValidationError(fmt::format("ablation: K {} is not on the grid", x));
    return static_cast<std::size_t>(it - v.begin());
}

AblationResult empty_result(const AblationGrid& grid) {
    grid.validate();
    AblationResult r;
    r.alphas = grid.alphas;
    r.ks = grid.ks;
    r.cells.assign(grid.alphas.size(), std::vector<Cell>(grid.ks.size()));
    return r;
}

}  // namespace

void AblationGrid::validate() const {
    if (alphas.empty() || ks.empty()) throw ValidationError("ablation: grid axes must be non-empty");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] >= 0.0 && alphas[i] <= 1.0)) throw ValidationError("ablation: alphas must lie in [0, 1]");
        if (i > 0 && !(alphas[i] > alphas[i - 1])) throw ValidationError("ablation: alphas must strictly increase");
    }
    for (std::size_t i = 0; i < ks.size(); ++i) {
        if (ks[i] == 0) throw ValidationError("ablation: ks must be >= 1");
        if (i > 0 && ks[i] <= ks[i - 1]) throw ValidationError("ablation: ks must strictly increase");
    }
    if (samples_per_cell == 0) throw ValidationError("ablation: samples_per_cell must be >= 1");
}

std::vector<std::pair<double, std::size_t>> AblationResult::missing() const {
    std::vector<std::pair<double, std::size_t>> out;
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        for (std::size_t k = 0; k < ks.size(); ++k) {
            if (!cells[a][k].mean) out.emplace_back(alphas[a], ks[k]);
        }
    }
    return out;
}

void finalize(AblationResult& r) {
    const auto line_mean = [](auto&& get, std::size_t n) {
        Marginal m{0, std::nullopt, false};
        double sum = 0;
        std::size_t present = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (const auto& v = get(i)) {
                sum += *v;
                ++present;
            } else {
                m.incomplete = true;
            }
        }
        if (present) m.mean = sum / static_cast<double>(present);
        return m;
    };
    r.marginal_alpha.clear();
    r.marginal_k.clear();
    for (std::size_t a = 0; a < r.alphas.size(); ++a) {
        auto m = line_mean([&](std::size_t k) { return r.cells[a][k].mean; }, r.ks.size());
        m.value = r.alphas[a];
        r.marginal_alpha.push_back(m);
    }
    for (std::size_t k = 0; k < r.ks.size(); ++k) {
        auto m = line_mean([&](std::size_t a) { return r.cells[a][k].mean; }, r.alphas.size());
        m.value = static_cast<double>(r.ks[k]);
        r.marginal_k.push_back(m);
    }

    r.argmax.reset();
    // Scan k-major so the first strict maximum already has the smallest k,
    // then the smallest alpha.
    for (std::size_t k = 0; k < r.ks.size(); ++k) {
        for (std::size_t a = 0; a < r.alphas.size(); ++a) {
            const auto& m = r.cells[a][k].mean;
            if (m && (!r.argmax || *m > r.argmax->mean)) r.argmax = ArgMax{a, k, *m};
        }
    }

    double sum = 0;
    std::size_t count = 0;
    for (const auto& row : r.cells) {
        for (const auto& c : row) {
            sum += c.sum;
            count += c.count;
        }
    }
    r.grand_mean.reset();
    if (count) r.grand_mean = sum / static_cast<double>(count);
}

AblationResult aggregate(const AblationGrid& grid, const std::vector<std::vector<std::vector<double>>>& scores) {
    auto r = empty_result(grid);
    if (scores.size() != grid.alphas.size()) throw ValidationError("ablation: score table does not match the grid");
    for (std::size_t a = 0; a < scores.size(); ++a) {
        if (scores[a].size() != grid.ks.size()) throw ValidationError("ablation: score table does not match the grid");
        for (std::size_t k = 0; k < scores[a].size(); ++k) {
            auto& c = r.cells[a][k];
            for (double s : scores[a][k]) c.sum += s;
            c.count = scores[a][k].size();
            if (c.count) c.mean = c.sum / static_cast<double>(c.count);
        }
    }
    finalize(r);
    return r;
}

AblationResult from_cell_means(const AblationGrid& grid,
                               const std::vector<std::tuple<double, std::size_t, double>>& means) {
    auto r = empty_result(grid);
    for (const auto& [alpha, k, mean] : means) {
        auto& c = r.cells[index_of(grid.alphas, alpha)][index_of(grid.ks, k)];
        c.sum = mean;
        c.count = 1;
        c.mean = mean;
    }
    finalize(r);
    return r;
}

json to_json(const AblationSample& s, const AblationResult& r) {
    json j{{"alpha", r.alphas.at(s.alpha_index)},
           {"k", r.ks.at(s.k_index)},
           {"sample", s.sample},
           {"anchor_chunk_id", s.anchor_chunk_id},
           {"qtype", generation::question_type(s.qtype).code_str()}};
    j["total"] = s.total ? json(*s.total) : json(nullptr);
    if (!s.error.empty()) j["error"] = s.error;
    return j;
}

AblationResult run_ablation(const AblationGrid& grid, const AblationInputs& in, gateway::Gateway& teacher,
                            gateway::Gateway& judge, std::vector<AblationSample>* samples_out) {
    grid.validate();
    if (!in.chunks || in.chunks->empty() || !in.retriever) throw ValidationError("ablation: no indexed chunks");
    const auto& chunks = *in.chunks;
    const auto lookup = generation::make_lookup(chunks);
    const auto na = grid.alphas.size(), nk = grid.ks.size(), spc = grid.samples_per_cell;

    // Anchors and types are shared across cells.
    std::vector<std::size_t> anchor(spc);
    std::vector<int> qtype(spc);
    for (std::size_t s = 0; s < spc; ++s) {
        Rng rng(derive_seed(in.seed, "ablation-anchor", s));
        anchor[s] = static_cast<std::size_t>(rng.below(chunks.size()));
        qtype[s] = generation::sample_qtype(in.qtype_mix, derive_seed(in.seed, "ablation-qtype", s));
    }

    std::vector<AblationSample> samples(na * nk * spc);
    parallel_for(samples.size(), static_cast<std::size_t>(teacher.config().max_parallel), [&](std::size_t i) {
        auto& out = samples[i];
        out.alpha_index = i / (nk * spc);
        out.k_index = (i / spc) % nk;
        out.sample = i % spc;
        const auto& chunk = chunks[anchor[out.sample]];
        out.anchor_chunk_id = chunk.id;
        out.qtype = qtype[out.sample];

        index::RetrievalConfig rc;
        rc.alpha = grid.alphas[out.alpha_index];
        rc.top_k = grid.ks[out.k_index];
        rc.k_cand = std::max(in.k_cand, (rc.top_k + 1) / 2);
        try {
            const auto ctx = generation::assemble_context(chunk, *in.retriever, rc, lookup);
            auto params = in.sampling;
            params.seed = generation::request_seed(derive_seed(in.seed, "ablation-generate", i));
            const auto draft = generation::generate_question(generation::question_type(out.qtype), ctx, teacher, params,
                                                             fmt::format("ablation-{}", i));
            out.total = quality::ablation_score(draft.question, draft.answer, ctx, judge,
                                                generation::request_seed(derive_seed(in.seed, "ablation-judge", i)))
                            .total;
        } catch (const ParseError& e) {
            out.error = e.what();
        } catch (const gateway::GatewayError& e) {
            out.error = e.what();
        }
    });

    std::vector<std::vector<std::vector<double>>> scores(na, std::vector<std::vector<double>>(nk));
    for (const auto& s : samples) {
        if (s.total) scores[s.alpha_index][s.k_index].push_back(*s.total);
    }
    auto r = aggregate(grid, scores);
    if (samples_out) *samples_out = std::move(samples);
    return r;
}

json AblationResult::summary() const {
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json cells_j = json::array();
    for (std::size_t a = 0; a < alphas.size(); ++a) {
        for (std::size_t k = 0; k < ks.size(); ++k) {
            cells_j.push_back({{"alpha", alphas[a]}, {"k", ks[k]}, {"mean", opt(cells[a][k].mean)},
                               {"count", cells[a][k].count}});
        }
    }
    json ma = json::array(), mk = json::array(), miss = json::array();
    for (const auto& m : marginal_alpha) ma.push_back({{"alpha", m.value}, {"mean", opt(m.mean)}, {"incomplete", m.incomplete}});
    for (const auto& m : marginal_k) mk.push_back({{"k", m.value}, {"mean", opt(m.mean)}, {"incomplete", m.incomplete}});
    for (const auto& [a, k] : missing()) miss.push_back({{"alpha", a}, {"k", k}});
    json j{{"cells", std::move(cells_j)},
           {"marginal_alpha", std::move(ma)},
           {"marginal_k", std::move(mk)},
           {"missing_cells", std::move(miss)},
           {"grand_mean", opt(grand_mean)}};
    j["argmax"] = argmax ? json{{"alpha", alphas[argmax->alpha_index]}, {"k", ks[argmax->k_index]}, {"mean", argmax->mean}}
                         : json(nullptr);
    return j;
}

std::string render_csv(const AblationResult& r) {
    std::string out = "alpha,k,mean,count\n";
    for (std::size_t a = 0; a < r.alphas.size(); ++a) {
        for (std::size_t k = 0; k < r.ks.size(); ++k) {
            const auto& c = r.cells[a][k];
            out += fmt::format("{},{},{},{}\n", alpha_label(r.alphas[a]), r.ks[k], c.mean ? fmt::format("{}", *c.mean) : "",
                               c.count);
        }
    }
    return out;
}

std::string render_svg(const AblationResult& r) {
    constexpr int cw = 84, ch = 48;      // cell size
    constexpr int left = 70, top = 110;  // heatmap origin
    constexpr int bar = 80;              // marginal bar length
    const int nk = static_cast<int>(r.ks.size()), na = static_cast<int>(r.alphas.size());
    const int width = left + nk * cw + 20 + bar + 50;
    const int height = top + na * ch + 60;

    double lo = 0, hi = 0;
    bool any = false;
    for (const auto& row : r.cells) {
        for (const auto& c : row) {
            if (!c.mean) continue;
            lo = any ? std::min(lo, *c.mean) : *c.mean;
            hi = any ? std::max(hi, *c.mean) : *c.mean;
            any = true;
        }
    }
    const auto t_of = [&](double v) { return hi > lo ? (v - lo) / (hi - lo) : 0.5; };

    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n"
        "<rect width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n",
        width, height);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">Top-K</text>\n", left + nk * cw / 2, height - 12);
    s += fmt::format("<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">alpha</text>\n",
                     top + na * ch / 2, top + na * ch / 2);

    for (int a = 0; a < na; ++a) {
        const int y = top + a * ch;
        s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", left - 8, y + ch / 2 + 4,
                         alpha_label(r.alphas[static_cast<std::size_t>(a)]));
        for (int k = 0; k < nk; ++k) {
            const int x = left + k * cw;
            const auto& c = r.cells[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)];
            const bool is_max = r.argmax && r.argmax->alpha_index == static_cast<std::size_t>(a) &&
                                r.argmax->k_index == static_cast<std::size_t>(k);
            const std::string fill = c.mean ? shade(t_of(*c.mean)) : "#dddddd";
            const std::string ink = c.mean && t_of(*c.mean) > 0.55 ? "#ffffff" : "#000000";
            const std::string label = c.mean ? num(*c.mean) : "n/a";
            s += fmt::format("<g class=\"cell{}\" data-alpha=\"{}\" data-k=\"{}\">", is_max ? " max" : "",
                             alpha_label(r.alphas[static_cast<std::size_t>(a)]), r.ks[static_cast<std::size_t>(k)]);
            s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#ffffff\"/>", x, y,
                             cw, ch, fill);
            s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{}\">{}</text>", x + cw / 2,
                             y + ch / 2 + 4, ink, label);
            if (is_max) {
                s += fmt::format(
                    "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#d62728\" "
                    "stroke-width=\"3\"><title>maximum {}</title></rect>",
                    x + 2, y + 2, cw - 4, ch - 4, label);
            }
            s += "</g>\n";
        }
    }

    // Marginal bars: K means along the top, alpha means along the right.
    const auto bar_len = [&](const std::optional<double>& m) {
        return m ? static_cast<int>(std::lround(12 + (bar - 12) * t_of(*m))) : 0;
    };
    for (int k = 0; k < nk; ++k) {
        const auto& m = r.marginal_k[static_cast<std::size_t>(k)];
        const int x = left + k * cw;
        const int len = bar_len(m.mean);
        s += fmt::format("<rect class=\"marginal-k\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#7f7f7f\"/>",
                         x + 12, top - 10 - len, cw - 24, len);
        s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}{}</text>\n", x + cw / 2, top - 14 - len,
                         m.mean ? num(*m.mean) : "n/a", m.incomplete ? "*" : "");
        s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">K={}</text>\n", x + cw / 2, top + na * ch + 18,
                         r.ks[static_cast<std::size_t>(k)]);
    }
    for (int a = 0; a < na; ++a) {
        const auto& m = r.marginal_alpha[static_cast<std::size_t>(a)];
        const int y = top + a * ch;
        const int x0 = left + nk * cw + 10;
        const int len = bar_len(m.mean);
        s += fmt::format("<rect class=\"marginal-alpha\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#7f7f7f\"/>",
                         x0, y + 10, len, ch - 20);
        s += fmt::format("<text x=\"{}\" y=\"{}\">{}{}</text>\n", x0 + len + 4, y + ch / 2 + 4,
                         m.mean ? num(*m.mean) : "n/a", m.incomplete ? "*" : "");
    }
    s += "</svg>\n";
    return s;
}

void emit_heatmap(const AblationResult& r, const std::filesystem::path& out_dir) {
    if (r.alphas.empty() || r.ks.empty()) throw ValidationError("ablation: empty result");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw ValidationError(fmt::format("ablation: cannot create {}: {}", out_dir.string(), ec.message()));
    write_text(out_dir / "ablation.csv", render_csv(r));
    write_text(out_dir / "ablation.svg", render_svg(r));
    write_json(out_dir / "ablation_summary.json", r.summary());
}

}  // namespace sftgen::ablation
