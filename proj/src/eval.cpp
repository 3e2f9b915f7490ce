#include "midipose/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

namespace midipose::eval {

double torso_length(const Pose2D& gt) {
    validate_pose(gt);
    const double msx = 0.5 * (gt.x(5) + gt.x(6));
    const double msy = 0.5 * (gt.y(5) + gt.y(6));
    const double mhx = 0.5 * (gt.x(11) + gt.x(12));
    const double mhy = 0.5 * (gt.y(11) + gt.y(12));
    const double len = std::hypot(msx - mhx, msy - mhy);
    if (len < 1e-6) {
        throw std::invalid_argument("torso_length: degenerate pose (torso < 1e-6)");
    }
    return len;
}

double pck(std::span<const Pose2D> preds, std::span<const Pose2D> gts, double alpha) {
    if (preds.empty() || preds.size() != gts.size()) {
        throw std::invalid_argument("pck: need equal-length non-empty pose sequences");
    }
    std::size_t correct = 0;
    for (std::size_t f = 0; f < preds.size(); ++f) {
        const double threshold = (alpha / 100.0) * torso_length(gts[f]);
        for (std::size_t k = 0; k < kKeypoints; ++k) {
            const double d = std::hypot(preds[f].x(k) - gts[f].x(k), preds[f].y(k) - gts[f].y(k));
            if (d <= threshold) ++correct;
        }
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(preds.size() * kKeypoints);
}

void EvalInputs::validate() const {
    if (preds.empty() || preds.size() != gts.size() || preds.size() != motions.size() ||
        preds.size() != tags.size()) {
        throw std::invalid_argument("EvalInputs: mismatched or empty columns");
    }
}

PckTable evaluate(const EvalInputs& inputs, std::string_view model_name,
                  std::span<const double> alphas) {
    inputs.validate();
    if (alphas.empty()) throw std::invalid_argument("evaluate: no thresholds");

    // slice name -> (kind, member positions); std::map keeps names sorted
    std::map<std::string, std::pair<SliceKind, std::vector<std::size_t>>> slices;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        slices[std::string(to_string(inputs.motions[i]))].first = SliceKind::process;
        slices[std::string(to_string(inputs.motions[i]))].second.push_back(i);
        if (inputs.tags[i] != StateTag::none) {
            auto& entry = slices[std::string(to_string(inputs.tags[i]))];
            entry.first = SliceKind::state;
            entry.second.push_back(i);
        }
    }

    std::vector<double> sorted_alphas(alphas.begin(), alphas.end());
    std::sort(sorted_alphas.begin(), sorted_alphas.end());

    PckTable table;
    for (const auto& [name, entry] : slices) {
        std::vector<Pose2D> p, g;
        p.reserve(entry.second.size());
        g.reserve(entry.second.size());
        for (std::size_t i : entry.second) {
            p.push_back(inputs.preds[i]);
            g.push_back(inputs.gts[i]);
        }
        for (double alpha : sorted_alphas) {
            table.push_back({entry.first, name, std::string(model_name), alpha, pck(p, g, alpha)});
        }
    }
    return table;
}

namespace {

void sort_table(PckTable& table) {
    std::sort(table.begin(), table.end(), [](const PckRow& a, const PckRow& b) {
        if (a.slice != b.slice) return a.slice < b.slice;
        if (a.model != b.model) return a.model < b.model;
        return a.alpha < b.alpha;
    });
}

std::string format_cell(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace

PckTable merge_tables(const PckTable& a, const PckTable& b) {
    PckTable out = a;
    out.insert(out.end(), b.begin(), b.end());
    sort_table(out);
    return out;
}

std::string format_table(const PckTable& table, SliceKind kind) {
    // rows: (slice, model) pair, columns: ascending alpha
    std::set<double> alphas;
    std::vector<std::pair<std::string, std::string>> keys;
    std::map<std::pair<std::string, std::string>, std::map<double, double>> cells;
    for (const auto& row : table) {
        if (row.kind != kind) continue;
        alphas.insert(row.alpha);
        const auto key = std::make_pair(row.slice, row.model);
        if (cells.find(key) == cells.end()) keys.push_back(key);
        cells[key][row.alpha] = row.value;
    }
    std::sort(keys.begin(), keys.end());

    std::string out = kind == SliceKind::state ? "Motion state (%)" : "Motion process (%)";
    out += "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-12s %-10s", "slice", "model");
    out += buf;
    for (double a : alphas) {
        std::snprintf(buf, sizeof buf, " PCK@%-6.5g", a);
        out += buf;
    }
    out += "\n";
    for (const auto& key : keys) {
        std::snprintf(buf, sizeof buf, "%-12s %-10s", key.first.c_str(), key.second.c_str());
        out += buf;
        for (double a : alphas) {
            std::snprintf(buf, sizeof buf, " %-10s", format_cell(cells[key][a]).c_str());
            out += buf;
        }
        out += "\n";
    }
    return out;
}

std::string format_csv(const PckTable& table) {
    PckTable sorted = table;
    sort_table(sorted);
    std::string out = "slice,model,alpha,pck\n";
    char buf[160];
    for (const auto& row : sorted) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.5g,%.2f\n", row.slice.c_str(), row.model.c_str(),
                      row.alpha, row.value);
        out += buf;
    }
    return out;
}

void write_report(const PckTable& table, const std::filesystem::path& text_path,
                  const std::filesystem::path& csv_path) {
    std::ofstream text(text_path);
    if (!text) throw std::runtime_error("write_report: cannot open " + text_path.string());
    text << format_table(table, SliceKind::state) << "\n" << format_table(table, SliceKind::process);
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("write_report: cannot open " + csv_path.string());
    csv << format_csv(table);
    if (!text || !csv) throw std::runtime_error("write_report: I/O failure");
}

}  // namespace midipose::eval
