#pragma once

// Scores a prediction file against ground truth: presence confusion matrix,
// road-count confusion matrix (buckets "1" vs "2+") and geometric
// polyline-distance metrics over greedily matched roads.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "roadnet/caption.hpp"
#include "roadnet/dataset.hpp"
#include "roadnet/geo.hpp"
#include "roadnet/version.hpp"

namespace roadnet {

struct EvalError : std::runtime_error {
    enum class Kind { EmptyOverlap };
    Kind kind;
    EvalError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct ParseDiagnostic {
    std::string image_id;
    std::string error;
};

struct PredictionSet {
    std::vector<InstructionPair> records;       // image_ids unique
    std::vector<ParseDiagnostic> diagnostics;   // populated by the evaluator
};

inline PredictionSet load_predictions(const std::filesystem::path& path) {
    PredictionSet set;
    set.records = pairs_from_json(detail::read_json_file(path), "predictions");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < set.records.size(); ++i)
        if (!seen.insert(set.records[i].image_id).second)
            throw SchemaViolationError("predictions", i,
                                       "duplicate image_id \"" + set.records[i].image_id + "\"");
    return set;
}

struct ConfusionMatrix2x2 {
    std::string row_axis;                     // ground-truth axis label
    std::string col_axis;                     // prediction axis label
    std::array<std::string, 2> row_names;
    std::array<std::string, 2> col_names;
    long long c11 = 0, c12 = 0, c21 = 0, c22 = 0;

    long long total() const { return c11 + c12 + c21 + c22; }
    double accuracy() const {
        const long long t = total();
        if (t <= 0) throw std::domain_error("confusion matrix is empty");
        return static_cast<double>(c11 + c22) / static_cast<double>(t);
    }
    void add(int row, int col) {
        if (row == 0)
            (col == 0 ? c11 : c12) += 1;
        else
            (col == 0 ? c21 : c22) += 1;
    }
};

// Accuracy formatting: the 4-decimal value, and its half-up 2-decimal
// rounding (0.3714 -> "0.37").
inline std::string format_accuracy4(double acc) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", acc);
    return buf;
}

inline std::string format_accuracy2(double acc) {
    const long long v4 = std::llround(acc * 10000.0);
    const long long v2 = (v4 + 50) / 100;  // half-up on the 4-decimal value
    char buf[32];
    std::snprintf(buf, sizeof buf, "%lld.%02lld", v2 / 100, v2 % 100);
    return buf;
}

// ---------------------------------------------------------------------------
// Polyline metrics

namespace detail {

// Samples at arc-length multiples of `step`; endpoints always included.
// `arc_out`, when given, receives each sample's arc-length position.
inline std::vector<Vec2> resample_polyline(const PixelPolyline& line, double step,
                                           std::vector<double>* arc_out = nullptr) {
    std::vector<Vec2> verts;
    verts.reserve(line.vertices.size());
    for (const PixelPoint& p : line.vertices)
        verts.push_back(Vec2{static_cast<double>(p.px), static_cast<double>(p.py)});

    std::vector<Vec2> out;
    out.push_back(verts.front());
    if (arc_out) {
        arc_out->clear();
        arc_out->push_back(0.0);
    }
    double carried = 0.0;  // distance already covered since the last sample
    double walked = 0.0;   // arc length up to the start of the current segment
    for (std::size_t i = 1; i < verts.size(); ++i) {
        const Vec2& a = verts[i - 1];
        const Vec2& b = verts[i];
        const double seg = std::hypot(b.x - a.x, b.y - a.y);
        if (seg == 0.0) continue;
        double along = step - carried;
        while (along <= seg) {
            const double t = along / seg;
            out.push_back(Vec2{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
            if (arc_out) arc_out->push_back(walked + along);
            along += step;
        }
        carried = seg - (along - step);
        walked += seg;
    }
    const Vec2& last = verts.back();
    if (out.back().x != last.x || out.back().y != last.y) {
        out.push_back(last);
        if (arc_out) arc_out->push_back(walked);
    }
    return out;
}

// Directed mean: distance from the resampled points of one polyline to the
// other polyline's exact geometry, averaged along the arc (trapezoid weights
// over the arc positions). Equal-weight endpoint samples would bias the
// value by O(range/n); this form stays within ~0.02 px of the dense-sampling
// limit at the default 1 px step regardless of pair geometry.
inline double directed_mean_nn(const std::vector<Vec2>& from, const std::vector<double>& arc,
                               const std::vector<Vec2>& to) {
    auto dist_to_target = [&to](const Vec2& p) {
        double best = 1e300;
        for (std::size_t i = 1; i < to.size(); ++i)
            best = std::min(best, point_segment_distance(p, to[i - 1], to[i]));
        return best;
    };
    const double total = arc.back() - arc.front();
    if (from.size() == 1 || total <= 0.0) return dist_to_target(from[0]);
    double sum = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i) {
        const double before = i > 0 ? arc[i] - arc[i - 1] : 0.0;
        const double after = i + 1 < from.size() ? arc[i + 1] - arc[i] : 0.0;
        sum += 0.5 * (before + after) * dist_to_target(from[i]);
    }
    return sum / total;
}

inline std::vector<Vec2> polyline_vertices(const PixelPolyline& line) {
    std::vector<Vec2> v;
    v.reserve(line.vertices.size());
    for (const PixelPoint& p : line.vertices)
        v.push_back(Vec2{static_cast<double>(p.px), static_cast<double>(p.py)});
    return v;
}

}  // namespace detail

struct PolylineDistance {
    double chamfer = 0.0;   // max of the two directed mean NN distances
    double endpoint = 0.0;  // best orientation pairing of endpoint distances
};

inline PolylineDistance polyline_distance(const PixelPolyline& a, const PixelPolyline& b,
                                          double sample_step_px = 1.0) {
    std::vector<double> arc_a, arc_b;
    const auto sa = detail::resample_polyline(a, sample_step_px, &arc_a);
    const auto sb = detail::resample_polyline(b, sample_step_px, &arc_b);
    PolylineDistance d;
    d.chamfer = std::max(detail::directed_mean_nn(sa, arc_a, detail::polyline_vertices(b)),
                         detail::directed_mean_nn(sb, arc_b, detail::polyline_vertices(a)));

    auto dist = [](const Vec2& p, const Vec2& q) { return std::hypot(p.x - q.x, p.y - q.y); };
    const double same = 0.5 * (dist(sa.front(), sb.front()) + dist(sa.back(), sb.back()));
    const double flip = 0.5 * (dist(sa.front(), sb.back()) + dist(sa.back(), sb.front()));
    d.endpoint = std::min(same, flip);
    return d;
}

// Greedy matching on ascending pairwise chamfer; each road used at most once;
// pairs above the threshold stay unmatched; ties break on (gt, pred) index.
inline std::vector<std::pair<int, int>> match_roads(const std::vector<PixelPolyline>& gt_roads,
                                                    const std::vector<PixelPolyline>& pred_roads,
                                                    double max_match_chamfer_px = 50.0,
                                                    double sample_step_px = 1.0,
                                                    std::vector<std::vector<PolylineDistance>>*
                                                        distances_out = nullptr) {
    const std::size_t ng = gt_roads.size(), np = pred_roads.size();
    std::vector<std::vector<PolylineDistance>> dist(ng, std::vector<PolylineDistance>(np));
    for (std::size_t i = 0; i < ng; ++i)
        for (std::size_t j = 0; j < np; ++j)
            dist[i][j] = polyline_distance(gt_roads[i], pred_roads[j], sample_step_px);

    struct Cand {
        double chamfer;
        int gi, pj;
    };
    std::vector<Cand> cands;
    cands.reserve(ng * np);
    for (std::size_t i = 0; i < ng; ++i)
        for (std::size_t j = 0; j < np; ++j)
            if (dist[i][j].chamfer <= max_match_chamfer_px)
                cands.push_back({dist[i][j].chamfer, static_cast<int>(i), static_cast<int>(j)});
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.chamfer != b.chamfer) return a.chamfer < b.chamfer;
        if (a.gi != b.gi) return a.gi < b.gi;
        return a.pj < b.pj;
    });

    std::vector<char> gt_used(ng, 0), pred_used(np, 0);
    std::vector<std::pair<int, int>> matches;
    for (const Cand& c : cands) {
        if (gt_used[static_cast<std::size_t>(c.gi)] || pred_used[static_cast<std::size_t>(c.pj)])
            continue;
        gt_used[static_cast<std::size_t>(c.gi)] = 1;
        pred_used[static_cast<std::size_t>(c.pj)] = 1;
        matches.emplace_back(c.gi, c.pj);
    }
    std::sort(matches.begin(), matches.end());
    if (distances_out) *distances_out = std::move(dist);
    return matches;
}

// ---------------------------------------------------------------------------
// Report assembly

enum class CountInclusionRule { BothFound, GtFound, All };

inline const char* count_rule_name(CountInclusionRule r) {
    switch (r) {
        case CountInclusionRule::BothFound: return "both_found";
        case CountInclusionRule::GtFound: return "gt_found";
        case CountInclusionRule::All: return "all";
    }
    return "both_found";
}

inline std::optional<CountInclusionRule> count_rule_from_name(std::string_view s) {
    if (s == "both_found") return CountInclusionRule::BothFound;
    if (s == "gt_found") return CountInclusionRule::GtFound;
    if (s == "all") return CountInclusionRule::All;
    return std::nullopt;
}

struct EvalConfig {
    CountInclusionRule count_rule = CountInclusionRule::BothFound;
    ParseStrictness strictness = ParseStrictness::Strict;
    double sample_step_px = 1.0;
    double max_match_chamfer_px = 50.0;
};

struct MatchedRoadPair {
    int gt_index = 0;
    int pred_index = 0;
    double chamfer_px = 0.0;
    double endpoint_px = 0.0;
};

struct ImageGeometry {
    std::string image_id;
    std::vector<MatchedRoadPair> matches;
    int unmatched_gt = 0;
    int unmatched_pred = 0;
};

struct GeometryReport {
    std::vector<ImageGeometry> per_image;
    long long matched_pairs = 0;
    long long unmatched_gt = 0;
    long long unmatched_pred = 0;
    double mean_chamfer_px = 0.0;
    double median_chamfer_px = 0.0;
    double p95_chamfer_px = 0.0;
    double mean_endpoint_px = 0.0;
};

struct SkippedRecord {
    std::string image_id;
    std::string stage;   // "input" | "count" | "geometry"
    std::string reason;
};

struct EvalReport {
    ConfusionMatrix2x2 presence;
    ConfusionMatrix2x2 count;
    std::string count_inclusion_rule;
    GeometryReport geometry;
    std::vector<SkippedRecord> skipped;
    std::vector<ParseDiagnostic> parse_diagnostics;
    long long overlap = 0;          // prediction ids found in ground truth
    long long presence_scored = 0;  // == overlap
    long long count_scored = 0;
    std::string toolkit_version = kToolkitVersion;
};

namespace detail {

struct ScoredRecord {
    const GroundTruthRecord* gt;
    const InstructionPair* pred;
    std::optional<Caption> caption;  // empty when the caption failed to parse
    std::string parse_error;
};

}  // namespace detail

inline EvalReport evaluate_records(const std::vector<GroundTruthRecord>& gts,
                                   const PredictionSet& preds, const EvalConfig& cfg = {}) {
    EvalReport report;
    report.count_inclusion_rule = count_rule_name(cfg.count_rule);
    report.presence = ConfusionMatrix2x2{"ground truth",
                                         "prediction",
                                         {"road found", "road not found"},
                                         {"road found", "road not found"},
                                         0,
                                         0,
                                         0,
                                         0};
    report.count = ConfusionMatrix2x2{
        "ground truth", "prediction", {"1 road", "2+ roads"}, {"1 road", "2+ roads"}, 0, 0, 0, 0};

    std::map<std::string, const GroundTruthRecord*> by_id;
    for (const GroundTruthRecord& g : gts) by_id[g.image_id] = &g;

    std::vector<detail::ScoredRecord> scored;
    scored.reserve(preds.records.size());
    for (const InstructionPair& p : preds.records) {
        const auto it = by_id.find(p.image_id);
        if (it == by_id.end()) {
            report.skipped.push_back({p.image_id, "input", "image_id not present in ground truth"});
            continue;
        }
        detail::ScoredRecord rec{it->second, &p, std::nullopt, {}};
        try {
            rec.caption = parse_caption(p.caption, cfg.strictness);
        } catch (const CaptionError& e) {
            rec.parse_error = e.what();
            report.parse_diagnostics.push_back({p.image_id, e.what()});
        }
        scored.push_back(std::move(rec));
    }
    if (scored.empty())
        throw EvalError(EvalError::Kind::EmptyOverlap,
                        "no prediction image_id matches the ground truth");
    report.overlap = static_cast<long long>(scored.size());

    // Presence: every overlapping record is scored; an unparseable caption
    // counts as "not found" rather than silently vanishing.
    for (const auto& rec : scored) {
        const bool gt_found = !rec.gt->roads.empty();
        const bool pred_found = rec.caption.has_value() &&
                                rec.caption->kind != CaptionKind::NoRoads;
        report.presence.add(gt_found ? 0 : 1, pred_found ? 0 : 1);
    }
    report.presence_scored = report.presence.total();

    // Road count, buckets "1" vs "2+".
    for (const auto& rec : scored) {
        const auto gt_count = static_cast<long long>(rec.gt->roads.size());
        std::optional<int> pred_count;
        if (rec.caption) pred_count = roads_count(*rec.caption);

        std::string skip_reason;
        switch (cfg.count_rule) {
            case CountInclusionRule::BothFound:
                if (gt_count < 1)
                    skip_reason = "ground truth has no roads";
                else if (!rec.caption)
                    skip_reason = "caption unparseable: " + rec.parse_error;
                else if (rec.caption->kind == CaptionKind::PresenceFound)
                    skip_reason = "presence-schema caption carries no road count";
                else if (rec.caption->kind == CaptionKind::NoRoads)
                    skip_reason = "prediction found no roads";
                break;
            case CountInclusionRule::GtFound:
                if (gt_count < 1)
                    skip_reason = "ground truth has no roads";
                else if (!rec.caption)
                    skip_reason = "caption unparseable: " + rec.parse_error;
                else if (!pred_count)
                    skip_reason = "presence-schema caption carries no road count";
                else if (*pred_count < 1)
                    skip_reason = "predicted road count 0 is not bucketable";
                break;
            case CountInclusionRule::All:
                if (gt_count < 1)
                    skip_reason = "ground-truth road count 0 is not bucketable";
                else if (!rec.caption)
                    skip_reason = "caption unparseable: " + rec.parse_error;
                else if (!pred_count)
                    skip_reason = "presence-schema caption carries no road count";
                else if (*pred_count < 1)
                    skip_reason = "predicted road count 0 is not bucketable";
                break;
        }
        if (!skip_reason.empty()) {
            report.skipped.push_back({rec.gt->image_id, "count", skip_reason});
            continue;
        }
        report.count.add(gt_count == 1 ? 0 : 1, *pred_count == 1 ? 0 : 1);
    }
    report.count_scored = report.count.total();

    // Geometry over pairs where both sides carry coordinates.
    std::vector<double> chamfers, endpoints;
    for (const auto& rec : scored) {
        if (rec.gt->roads.empty()) continue;
        if (!rec.caption || rec.caption->kind != CaptionKind::Roads) {
            if (rec.caption && rec.caption->kind == CaptionKind::PresenceFound)
                report.skipped.push_back({rec.gt->image_id, "geometry",
                                          "presence-schema caption carries no coordinates"});
            continue;
        }
        std::vector<std::vector<PolylineDistance>> dist;
        const auto matches = match_roads(rec.gt->roads, rec.caption->roads,
                                         cfg.max_match_chamfer_px, cfg.sample_step_px, &dist);
        ImageGeometry ig;
        ig.image_id = rec.gt->image_id;
        for (const auto& [gi, pj] : matches) {
            const PolylineDistance& d = dist[static_cast<std::size_t>(gi)][static_cast<std::size_t>(pj)];
            ig.matches.push_back({gi, pj, d.chamfer, d.endpoint});
            chamfers.push_back(d.chamfer);
            endpoints.push_back(d.endpoint);
        }
        ig.unmatched_gt = static_cast<int>(rec.gt->roads.size() - matches.size());
        ig.unmatched_pred = static_cast<int>(rec.caption->roads.size() - matches.size());
        report.geometry.unmatched_gt += ig.unmatched_gt;
        report.geometry.unmatched_pred += ig.unmatched_pred;
        report.geometry.per_image.push_back(std::move(ig));
    }
    report.geometry.matched_pairs = static_cast<long long>(chamfers.size());
    if (!chamfers.empty()) {
        double sum = 0.0, esum = 0.0;
        for (double c : chamfers) sum += c;
        for (double e : endpoints) esum += e;
        report.geometry.mean_chamfer_px = sum / static_cast<double>(chamfers.size());
        report.geometry.mean_endpoint_px = esum / static_cast<double>(endpoints.size());
        std::vector<double> sorted = chamfers;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        report.geometry.median_chamfer_px =
            n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        const std::size_t rank =
            std::min(n - 1, static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1);
        report.geometry.p95_chamfer_px = sorted[n == 1 ? 0 : rank];
    }
    return report;
}

inline EvalReport evaluate(const std::filesystem::path& gt_path,
                           const std::filesystem::path& pred_path, const EvalConfig& cfg = {}) {
    const auto gts = ground_truth_from_json(detail::read_json_file(gt_path));
    const auto preds = load_predictions(pred_path);
    return evaluate_records(gts, preds, cfg);
}

// ---------------------------------------------------------------------------
// Rendering

namespace detail {

inline void render_matrix(std::string& out, const ConfusionMatrix2x2& m, const char* title) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "== %s (rows: %s, columns: %s) ==\n", title, m.row_axis.c_str(),
                  m.col_axis.c_str());
    out += buf;
    std::snprintf(buf, sizeof buf, "%-22s %18s %18s\n", "", m.col_names[0].c_str(),
                  m.col_names[1].c_str());
    out += buf;
    std::snprintf(buf, sizeof buf, "gt: %-18s %18lld %18lld\n", m.row_names[0].c_str(), m.c11,
                  m.c12);
    out += buf;
    std::snprintf(buf, sizeof buf, "gt: %-18s %18lld %18lld\n", m.row_names[1].c_str(), m.c21,
                  m.c22);
    out += buf;
    if (m.total() > 0) {
        const double acc = m.accuracy();
        std::snprintf(buf, sizeof buf, "accuracy: %s (%s over %lld pairs)\n",
                      format_accuracy2(acc).c_str(), format_accuracy4(acc).c_str(), m.total());
        out += buf;
    } else {
        out += "accuracy: undefined (no scored pairs)\n";
    }
}

}  // namespace detail

inline std::string render_text_report(const EvalReport& r) {
    std::string out;
    char buf[256];
    detail::render_matrix(out, r.presence, "Road presence");
    out += "\n";
    detail::render_matrix(out, r.count, "Road count (1 vs 2+)");
    std::snprintf(buf, sizeof buf, "inclusion rule: %s (%lld of %lld overlapping pairs)\n",
                  r.count_inclusion_rule.c_str(), r.count_scored, r.overlap);
    out += buf;
    out += "\n== Geometry (matched roads) ==\n";
    std::snprintf(buf, sizeof buf, "matched pairs: %lld  unmatched gt: %lld  unmatched pred: %lld\n",
                  r.geometry.matched_pairs, r.geometry.unmatched_gt, r.geometry.unmatched_pred);
    out += buf;
    if (r.geometry.matched_pairs > 0) {
        std::snprintf(buf, sizeof buf,
                      "chamfer px: mean %.3f  median %.3f  p95 %.3f\nendpoint px: mean %.3f\n",
                      r.geometry.mean_chamfer_px, r.geometry.median_chamfer_px,
                      r.geometry.p95_chamfer_px, r.geometry.mean_endpoint_px);
        out += buf;
    }
    if (!r.skipped.empty()) {
        std::map<std::string, long long> reasons;
        for (const SkippedRecord& s : r.skipped) reasons[s.stage + ": " + s.reason] += 1;
        std::snprintf(buf, sizeof buf, "\nskipped: %zu record(s)\n", r.skipped.size());
        out += buf;
        for (const auto& [reason, n] : reasons) {
            std::snprintf(buf, sizeof buf, "  %lld x %s\n", n, reason.c_str());
            out += buf;
        }
    }
    return out;
}

inline nlohmann::ordered_json matrix_to_json(const ConfusionMatrix2x2& m) {
    nlohmann::ordered_json o;
    o["rows"] = {{"axis", m.row_axis}, {"names", {m.row_names[0], m.row_names[1]}}};
    o["columns"] = {{"axis", m.col_axis}, {"names", {m.col_names[0], m.col_names[1]}}};
    o["cells"] = {{"c11", m.c11}, {"c12", m.c12}, {"c21", m.c21}, {"c22", m.c22}};
    o["total"] = m.total();
    if (m.total() > 0) {
        o["accuracy"] = m.accuracy();
        o["accuracy_4dp"] = format_accuracy4(m.accuracy());
        o["accuracy_2dp"] = format_accuracy2(m.accuracy());
    } else {
        o["accuracy"] = nullptr;
    }
    return o;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
    nlohmann::ordered_json o;
    o["toolkit_version"] = r.toolkit_version;
    o["overlap"] = r.overlap;
    o["presence"] = matrix_to_json(r.presence);
    nlohmann::ordered_json count = matrix_to_json(r.count);
    count["inclusion_rule"] = r.count_inclusion_rule;
    o["count"] = std::move(count);
    nlohmann::ordered_json geo;
    geo["matched_pairs"] = r.geometry.matched_pairs;
    geo["unmatched_gt"] = r.geometry.unmatched_gt;
    geo["unmatched_pred"] = r.geometry.unmatched_pred;
    if (r.geometry.matched_pairs > 0) {
        geo["chamfer_px"] = {{"mean", r.geometry.mean_chamfer_px},
                             {"median", r.geometry.median_chamfer_px},
                             {"p95", r.geometry.p95_chamfer_px}};
        geo["endpoint_px"] = {{"mean", r.geometry.mean_endpoint_px}};
    }
    nlohmann::ordered_json per_image = nlohmann::ordered_json::array();
    for (const ImageGeometry& ig : r.geometry.per_image) {
        nlohmann::ordered_json e;
        e["image_id"] = ig.image_id;
        nlohmann::ordered_json ms = nlohmann::ordered_json::array();
        for (const MatchedRoadPair& m : ig.matches)
            ms.push_back({{"gt", m.gt_index},
                          {"pred", m.pred_index},
                          {"chamfer_px", m.chamfer_px},
                          {"endpoint_px", m.endpoint_px}});
        e["matches"] = std::move(ms);
        e["unmatched_gt"] = ig.unmatched_gt;
        e["unmatched_pred"] = ig.unmatched_pred;
        per_image.push_back(std::move(e));
    }
    geo["per_image"] = std::move(per_image);
    o["geometry"] = std::move(geo);
    nlohmann::ordered_json skipped = nlohmann::ordered_json::array();
    for (const SkippedRecord& s : r.skipped)
        skipped.push_back({{"image_id", s.image_id}, {"stage", s.stage}, {"reason", s.reason}});
    o["skipped"] = std::move(skipped);
    nlohmann::ordered_json diags = nlohmann::ordered_json::array();
    for (const ParseDiagnostic& d : r.parse_diagnostics)
        diags.push_back({{"image_id", d.image_id}, {"error", d.error}});
    o["parse_diagnostics"] = std::move(diags);
    return o;
}

}  // namespace roadnet
