#pragma once

// Annotation ingestion (OTB and GOT-10k directory layouts), OTB-protocol
// success/precision metrics, and the results/report file formats.
//
// Results file (one header line, then one record per frame):
//   frame,x,y,w,h,confidence,rs,status
// status is TRACKED or LOST. Numbers use the shortest round-trip decimal form.
//
// Report file: flat `key = value` lines (see write_report). Curve CSVs carry a
// threshold column, an `overall` column and one column per sequence.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mttsiam/combinet.hpp"
#include "mttsiam/error.hpp"
#include "mttsiam/geometry.hpp"
#include "mttsiam/synthetic_world.hpp"
#include "mttsiam/text.hpp"
#include "mttsiam/tracking_pipeline.hpp"

namespace mttsiam {

namespace fs = std::filesystem;

enum class Layout { Otb, Got10k };

struct SequenceAnnotation {
    std::string name;
    ImageDims dims;
    /// One entry per frame; nullopt marks an absent target.
    std::vector<std::optional<BBox>> gt;

    std::size_t frames() const { return gt.size(); }
    AnnotatedTrack to_track() const { return {dims, gt}; }
};

namespace detail {

inline std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    while (!lines.empty() && text::trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

inline std::string where(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line);
}

/// `x,y,w,h` with comma, tab or space separators. NaN or non-positive size
/// means the target is absent.
inline std::optional<BBox> parse_box_line(std::string_view line, const fs::path& path,
                                          std::size_t lineno) {
    if (text::trim(line).empty()) throw ParseError(where(path, lineno) + ": empty line");
    const auto fields = text::split(line, ", \t");
    if (fields.size() != 4)
        throw ParseError(where(path, lineno) + ": expected 4 fields, got " +
                         std::to_string(fields.size()));
    double v[4];
    for (std::size_t i = 0; i < 4; ++i) {
        const auto d = text::parse_double(fields[i]);
        if (!d) throw ParseError(where(path, lineno) + ": bad number '" + std::string(fields[i]) + "'");
        v[i] = *d;
    }
    const BBox box{v[0], v[1], v[2], v[3]};
    if (!box.valid()) return std::nullopt;
    return box;
}

inline std::vector<std::optional<BBox>> read_boxes(const fs::path& path) {
    const auto lines = read_lines(path);
    std::vector<std::optional<BBox>> out;
    out.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) out.push_back(parse_box_line(lines[i], path, i + 1));
    return out;
}

inline std::vector<bool> read_absence(const fs::path& path) {
    const auto lines = read_lines(path);
    std::vector<bool> out;
    out.reserve(lines.size());
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto v = text::parse_int(lines[i]);
        if (!v || (*v != 0 && *v != 1))
            throw ParseError(where(path, i + 1) + ": absence flag must be 0 or 1");
        out.push_back(*v == 1);
    }
    return out;
}

/// dims.txt holds "W H" (also "W,H" or "WxH").
inline std::optional<ImageDims> read_dims_file(const fs::path& path) {
    if (!fs::exists(path)) return std::nullopt;
    const auto lines = read_lines(path);
    if (lines.empty()) throw ParseError(path.string() + ": empty dims file");
    const auto fields = text::split(lines.front(), ", \txX");
    if (fields.size() != 2) throw ParseError(where(path, 1) + ": expected width and height");
    const auto w = text::parse_int(fields[0]);
    const auto h = text::parse_int(fields[1]);
    if (!w || !h || *w <= 0 || *h <= 0) throw ParseError(where(path, 1) + ": bad image size");
    return ImageDims{static_cast<int>(*w), static_cast<int>(*h)};
}

/// GOT-10k meta_info.ini: a `resolution: (W, H)` line.
inline std::optional<ImageDims> read_meta_info(const fs::path& path) {
    if (!fs::exists(path)) return std::nullopt;
    const auto lines = read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = text::trim(lines[i]);
        if (line.rfind("resolution", 0) != 0) continue;
        const auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        const auto fields = text::split(line.substr(colon + 1), "(), \t");
        std::vector<long long> nums;
        for (auto f : fields)
            if (auto v = text::parse_int(f)) nums.push_back(*v);
        if (nums.size() != 2 || nums[0] <= 0 || nums[1] <= 0)
            throw ParseError(where(path, i + 1) + ": bad resolution");
        return ImageDims{static_cast<int>(nums[0]), static_cast<int>(nums[1])};
    }
    return std::nullopt;
}

/// Smallest image holding every annotated box.
inline ImageDims extent_of(const std::vector<std::optional<BBox>>& boxes) {
    double w = 1.0;
    double h = 1.0;
    for (const auto& b : boxes) {
        if (!b) continue;
        w = std::max(w, b->right());
        h = std::max(h, b->bottom());
    }
    return {static_cast<int>(std::ceil(w)), static_cast<int>(std::ceil(h))};
}

inline std::optional<SequenceAnnotation> load_sequence(const fs::path& dir, Layout layout) {
    const fs::path gt_path = dir / (layout == Layout::Otb ? "groundtruth_rect.txt" : "groundtruth.txt");
    if (!fs::is_regular_file(gt_path)) return std::nullopt;
    SequenceAnnotation seq;
    seq.name = dir.filename().string();
    seq.gt = read_boxes(gt_path);
    if (seq.gt.empty()) throw ParseError(gt_path.string() + ": no frames");
    if (layout == Layout::Got10k) {
        fs::path absence = dir / "absence.label";
        if (!fs::exists(absence)) absence = dir / "absence";
        if (fs::exists(absence)) {
            const auto flags = read_absence(absence);
            if (flags.size() != seq.gt.size())
                throw ParseError(absence.string() + ": " + std::to_string(flags.size()) +
                                 " flags for " + std::to_string(seq.gt.size()) + " frames");
            for (std::size_t i = 0; i < flags.size(); ++i)
                if (flags[i]) seq.gt[i].reset();
        }
    }
    auto dims = read_dims_file(dir / "dims.txt");
    if (!dims) dims = read_meta_info(dir / "meta_info.ini");
    seq.dims = dims ? *dims : extent_of(seq.gt);
    return seq;
}

}  // namespace detail

/// Loads every sequence under `root` (sorted by name). `root` may itself be a
/// sequence directory. An empty result adds a warning.
inline std::vector<SequenceAnnotation> load_annotations(const fs::path& root, Layout layout,
                                                        std::vector<std::string>* warnings = nullptr) {
    if (!fs::is_directory(root)) throw ParseError(root.string() + ": not a directory");
    std::vector<SequenceAnnotation> out;
    if (auto single = detail::load_sequence(root, layout)) {
        out.push_back(std::move(*single));
        return out;
    }
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs)
        if (auto seq = detail::load_sequence(d, layout)) out.push_back(std::move(*seq));
    if (out.empty() && warnings) warnings->push_back(root.string() + ": no annotated sequences found");
    return out;
}

/// Ground truth of a synthetic world; occluded frames are absent.
inline SequenceAnnotation annotation_from_world(const std::string& name,
                                                const std::vector<WorldFrame>& world) {
    SequenceAnnotation seq;
    seq.name = name;
    if (!world.empty()) seq.dims = world.front().dims;
    for (const auto& f : world)
        seq.gt.push_back(f.target_visible ? std::optional<BBox>(f.target_box) : std::nullopt);
    return seq;
}

inline std::string format_box_line(const std::optional<BBox>& b) {
    if (!b) return "0,0,0,0";
    return text::format_double(b->x) + "," + text::format_double(b->y) + "," +
           text::format_double(b->w) + "," + text::format_double(b->h);
}

/// Writes `dir/<name>/` with groundtruth_rect.txt (absent frames as 0,0,0,0)
/// and dims.txt.
inline fs::path write_otb_sequence(const fs::path& dir, const SequenceAnnotation& seq) {
    const fs::path out = dir / seq.name;
    fs::create_directories(out);
    std::ofstream gt(out / "groundtruth_rect.txt");
    for (const auto& b : seq.gt) gt << format_box_line(b) << '\n';
    std::ofstream dims(out / "dims.txt");
    dims << seq.dims.width << ' ' << seq.dims.height << '\n';
    if (!gt || !dims) throw Error(out.string() + ": write failed");
    return out;
}

/// Writes `dir/<name>/` with groundtruth.txt, absence.label and meta_info.ini.
inline fs::path write_got10k_sequence(const fs::path& dir, const SequenceAnnotation& seq) {
    const fs::path out = dir / seq.name;
    fs::create_directories(out);
    std::ofstream gt(out / "groundtruth.txt");
    std::ofstream absence(out / "absence.label");
    for (const auto& b : seq.gt) {
        gt << format_box_line(b) << '\n';
        absence << (b ? 0 : 1) << '\n';
    }
    std::ofstream meta(out / "meta_info.ini");
    meta << "[METAINFO]\nresolution: (" << seq.dims.width << ", " << seq.dims.height << ")\n";
    if (!gt || !absence || !meta) throw Error(out.string() + ": write failed");
    return out;
}

// ---------------------------------------------------------------------------
// Metrics

inline constexpr std::size_t kSuccessPoints = 21;
inline constexpr std::size_t kPrecisionPoints = 51;
inline constexpr std::size_t kPrecisionHeadline = 20;

inline double success_threshold(std::size_t i) { return static_cast<double>(i) / 20.0; }
inline double precision_threshold(std::size_t i) { return static_cast<double>(i); }

using SuccessCurve = std::array<double, kSuccessPoints>;
using PrecisionCurve = std::array<double, kPrecisionPoints>;

/// A tracker output per frame; nullopt means "target reported absent" (LOST).
using Prediction = std::optional<BBox>;

struct SequenceMetrics {
    std::string name;
    std::size_t frames = 0;
    SuccessCurve success_curve{};
    PrecisionCurve precision_curve{};
    double success_auc = 0.0;
    double precision_at_20 = 0.0;
};

struct MetricReport {
    SuccessCurve success_curve{};
    PrecisionCurve precision_curve{};
    double success_auc = 0.0;
    double precision_at_20 = 0.0;
    std::size_t frames = 0;
    std::vector<SequenceMetrics> sequences;
};

struct FrameScore {
    double overlap = 0.0;
    double distance = std::numeric_limits<double>::infinity();
};

/// Both absent scores like a perfect match; one absent scores as a miss.
inline FrameScore score_frame(const Prediction& pred, const std::optional<BBox>& gt) {
    if (!pred && !gt) return {1.0, 0.0};
    if (!pred || !gt) return {};
    return {iou(*pred, *gt), center_distance(*pred, *gt)};
}

inline double curve_mean(std::span<const double> curve) {
    double sum = 0.0;
    for (double v : curve) sum += v;
    return sum / static_cast<double>(curve.size());
}

inline SequenceMetrics sequence_metrics(std::span<const Prediction> predicted,
                                        const SequenceAnnotation& gt) {
    if (predicted.size() != gt.gt.size())
        throw Error("metrics: " + gt.name + ": " + std::to_string(predicted.size()) +
                    " predictions vs " + std::to_string(gt.gt.size()) + " ground-truth frames");
    if (predicted.empty()) throw Error("metrics: " + gt.name + ": no frames");
    SequenceMetrics m;
    m.name = gt.name;
    m.frames = predicted.size();
    std::array<std::size_t, kSuccessPoints> hits{};
    std::array<std::size_t, kPrecisionPoints> close{};
    for (std::size_t f = 0; f < predicted.size(); ++f) {
        const FrameScore s = score_frame(predicted[f], gt.gt[f]);
        for (std::size_t i = 0; i < kSuccessPoints; ++i)
            if (s.overlap > success_threshold(i)) ++hits[i];
        for (std::size_t i = 0; i < kPrecisionPoints; ++i)
            if (s.distance <= precision_threshold(i)) ++close[i];
    }
    const auto n = static_cast<double>(m.frames);
    for (std::size_t i = 0; i < kSuccessPoints; ++i) m.success_curve[i] = static_cast<double>(hits[i]) / n;
    for (std::size_t i = 0; i < kPrecisionPoints; ++i)
        m.precision_curve[i] = static_cast<double>(close[i]) / n;
    m.success_auc = curve_mean(m.success_curve);
    m.precision_at_20 = m.precision_curve[kPrecisionHeadline];
    return m;
}

/// Curves averaged over sequences, in the given order.
inline MetricReport aggregate(std::vector<SequenceMetrics> sequences) {
    MetricReport r;
    if (sequences.empty()) return r;
    for (const auto& s : sequences) {
        for (std::size_t i = 0; i < kSuccessPoints; ++i) r.success_curve[i] += s.success_curve[i];
        for (std::size_t i = 0; i < kPrecisionPoints; ++i) r.precision_curve[i] += s.precision_curve[i];
        r.frames += s.frames;
    }
    const auto k = static_cast<double>(sequences.size());
    for (auto& v : r.success_curve) v /= k;
    for (auto& v : r.precision_curve) v /= k;
    r.success_auc = curve_mean(r.success_curve);
    r.precision_at_20 = r.precision_curve[kPrecisionHeadline];
    r.sequences = std::move(sequences);
    return r;
}

inline MetricReport compute_metrics(std::span<const Prediction> predicted, const SequenceAnnotation& gt) {
    return aggregate({sequence_metrics(predicted, gt)});
}

// ---------------------------------------------------------------------------
// Results files

inline constexpr const char* kResultsHeader = "frame,x,y,w,h,confidence,rs,status";

struct ResultRecord {
    std::size_t frame = 0;
    BBox box;
    double confidence = 0.0;
    double rs = 0.0;
    TrackStatus status = TrackStatus::Lost;
};

inline const char* status_name(TrackStatus s) { return s == TrackStatus::Tracked ? "TRACKED" : "LOST"; }

inline void write_results(std::ostream& os, std::span<const FrameResult> results) {
    os << kResultsHeader << '\n';
    for (const auto& r : results) {
        os << r.frame << ',' << text::format_double(r.box.x) << ',' << text::format_double(r.box.y)
           << ',' << text::format_double(r.box.w) << ',' << text::format_double(r.box.h) << ','
           << text::format_double(r.confidence) << ',' << text::format_double(r.rs) << ','
           << status_name(r.status) << '\n';
    }
}

inline std::vector<ResultRecord> read_results(const fs::path& path) {
    const auto lines = detail::read_lines(path);
    if (lines.empty() || text::trim(lines.front()) != kResultsHeader)
        throw ParseError(detail::where(path, 1) + ": missing results header");
    std::vector<ResultRecord> out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto fields = text::split(lines[i], ",");
        if (fields.size() != 8)
            throw ParseError(detail::where(path, i + 1) + ": expected 8 fields, got " +
                             std::to_string(fields.size()));
        ResultRecord r;
        const auto frame = text::parse_int(fields[0]);
        if (!frame || *frame < 0) throw ParseError(detail::where(path, i + 1) + ": bad frame index");
        r.frame = static_cast<std::size_t>(*frame);
        double v[6];
        for (std::size_t k = 0; k < 6; ++k) {
            const auto d = text::parse_double(fields[k + 1]);
            if (!d) throw ParseError(detail::where(path, i + 1) + ": bad number '" +
                                     std::string(fields[k + 1]) + "'");
            v[k] = *d;
        }
        r.box = {v[0], v[1], v[2], v[3]};
        r.confidence = v[4];
        r.rs = v[5];
        if (fields[7] == "TRACKED") r.status = TrackStatus::Tracked;
        else if (fields[7] == "LOST") r.status = TrackStatus::Lost;
        else throw ParseError(detail::where(path, i + 1) + ": unknown status '" + std::string(fields[7]) + "'");
        out.push_back(r);
    }
    return out;
}

/// LOST frames, and boxes without positive size, become "no prediction".
inline std::vector<Prediction> predictions_from(std::span<const ResultRecord> records) {
    std::vector<Prediction> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back(r.status == TrackStatus::Tracked && r.box.valid() ? Prediction(r.box) : std::nullopt);
    return out;
}

inline std::vector<Prediction> predictions_from(std::span<const FrameResult> results) {
    std::vector<Prediction> out;
    out.reserve(results.size());
    for (const auto& r : results)
        out.push_back(r.status == TrackStatus::Tracked && r.box.valid() ? Prediction(r.box) : std::nullopt);
    return out;
}

// ---------------------------------------------------------------------------
// Report files

inline void write_report(std::ostream& os, const MetricReport& r) {
    os << "sequences = " << r.sequences.size() << '\n';
    os << "frames = " << r.frames << '\n';
    os << "success_auc = " << text::format_double(r.success_auc) << '\n';
    os << "precision_at_20 = " << text::format_double(r.precision_at_20) << '\n';
    for (const auto& s : r.sequences) {
        os << "sequence." << s.name << ".frames = " << s.frames << '\n';
        os << "sequence." << s.name << ".success_auc = " << text::format_double(s.success_auc) << '\n';
        os << "sequence." << s.name << ".precision_at_20 = " << text::format_double(s.precision_at_20)
           << '\n';
    }
}

inline void write_success_csv(std::ostream& os, const MetricReport& r) {
    os << "threshold,overall";
    for (const auto& s : r.sequences) os << ',' << s.name;
    os << '\n';
    for (std::size_t i = 0; i < kSuccessPoints; ++i) {
        os << text::format_double(success_threshold(i)) << ',' << text::format_double(r.success_curve[i]);
        for (const auto& s : r.sequences) os << ',' << text::format_double(s.success_curve[i]);
        os << '\n';
    }
}

inline void write_precision_csv(std::ostream& os, const MetricReport& r) {
    os << "threshold,overall";
    for (const auto& s : r.sequences) os << ',' << s.name;
    os << '\n';
    for (std::size_t i = 0; i < kPrecisionPoints; ++i) {
        os << text::format_double(precision_threshold(i)) << ','
           << text::format_double(r.precision_curve[i]);
        for (const auto& s : r.sequences) os << ',' << text::format_double(s.precision_curve[i]);
        os << '\n';
    }
}

/// report.txt, success_curve.csv and precision_curve.csv under `dir`.
inline void write_report_files(const fs::path& dir, const MetricReport& r) {
    fs::create_directories(dir);
    std::ofstream rep(dir / "report.txt");
    write_report(rep, r);
    std::ofstream sc(dir / "success_curve.csv");
    write_success_csv(sc, r);
    std::ofstream pc(dir / "precision_curve.csv");
    write_precision_csv(pc, r);
    if (!rep || !sc || !pc) throw Error(dir.string() + ": write failed");
}

}  // namespace mttsiam
