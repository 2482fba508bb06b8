#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gcad/core.hpp"
#include "gcad/dataset_io.hpp"
#include "gcad/graph.hpp"

namespace gcad {

constexpr std::size_t kSimilarityBins = 20;  // over [-1, 1]

struct SimilarityHistogram {
    std::string group;                 // N-N, AB-AB, N-AB, N-GL, AB-GL
    std::vector<std::size_t> counts;   // kSimilarityBins entries
    double mean = 0.0;
    std::size_t samples = 0;
    bool empty() const { return samples == 0; }
};

struct SimilarityAnalysis {
    std::vector<SimilarityHistogram> groups;

    const SimilarityHistogram& group(const std::string& name) const {
        for (const auto& g : groups)
            if (g.group == name) return g;
        throw Error(detail::concat("similarity_analysis: no group ", name));
    }
};

namespace detail {

inline double cosine_rows(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
        dot += a(i, c) * b(j, c);
        na += a(i, c) * a(i, c);
        nb += b(j, c) * b(j, c);
    }
    if (na < 1e-24 || nb < 1e-24) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline void bin_value(SimilarityHistogram& h, double v) {
    double clamped = std::min(1.0, std::max(-1.0, v));
    std::size_t bin = std::min(kSimilarityBins - 1,
                               std::size_t((clamped + 1.0) / (2.0 / double(kSimilarityBins))));
    ++h.counts[bin];
    h.mean += v;
    ++h.samples;
}

}  // namespace detail

/// Pairwise cosine histograms for the three labeled groups plus the two
/// node-vs-global-context groups (Figs. 1 and 3 style). `rows` may be raw
/// features or encoder embeddings; `context` defaults to the column mean.
inline SimilarityAnalysis similarity_analysis(const Tensor& rows, const std::vector<int>& labels,
                                              const Tensor* context = nullptr) {
    if (labels.size() != rows.rows())
        throw Error("similarity_analysis: labels/rows size mismatch");
    bool any = false;
    for (int y : labels) any |= (y != kLabelUnknown);
    if (!any) throw Error("similarity_analysis: no labeled nodes");

    Tensor gl(1, rows.cols());
    if (context) {
        if (context->cols() != rows.cols() || context->rows() != 1)
            throw Error("similarity_analysis: context must be 1 x dim");
        gl = *context;
    } else {
        for (std::size_t c = 0; c < rows.cols(); ++c) {
            double s = 0.0;
            for (std::size_t r = 0; r < rows.rows(); ++r) s += rows(r, c);
            gl(0, c) = s / double(rows.rows());
        }
    }

    SimilarityAnalysis out;
    for (const char* name : {"N-N", "AB-AB", "N-AB", "N-GL", "AB-GL"}) {
        SimilarityHistogram h;
        h.group = name;
        h.counts.assign(kSimilarityBins, 0);
        out.groups.push_back(std::move(h));
    }
    auto& nn = out.groups[0];
    auto& abab = out.groups[1];
    auto& nab = out.groups[2];
    auto& ngl = out.groups[3];
    auto& abgl = out.groups[4];

    for (std::size_t i = 0; i < rows.rows(); ++i) {
        if (labels[i] == kLabelUnknown) continue;
        detail::bin_value(labels[i] == kLabelNormal ? ngl : abgl,
                          detail::cosine_rows(rows, i, gl, 0));
        for (std::size_t j = i + 1; j < rows.rows(); ++j) {
            if (labels[j] == kLabelUnknown) continue;
            double v = detail::cosine_rows(rows, i, rows, j);
            if (labels[i] == kLabelNormal && labels[j] == kLabelNormal) detail::bin_value(nn, v);
            else if (labels[i] == kLabelAbnormal && labels[j] == kLabelAbnormal) detail::bin_value(abab, v);
            else detail::bin_value(nab, v);
        }
    }
    for (auto& g : out.groups)
        if (g.samples) g.mean /= double(g.samples);
    return out;
}

/// CSV with bin edges: group,bin_lo,bin_hi,count plus one summary row per
/// group carrying the mean and sample count.
inline void write_similarity_csv(const SimilarityAnalysis& a, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw Error(detail::concat("cannot write ", path.string()));
    os << "group,bin_lo,bin_hi,count\n";
    double width = 2.0 / double(kSimilarityBins);
    for (const auto& g : a.groups)
        for (std::size_t b = 0; b < kSimilarityBins; ++b)
            os << g.group << "," << detail::format_double(-1.0 + width * double(b)) << ","
               << detail::format_double(-1.0 + width * double(b + 1)) << "," << g.counts[b] << "\n";
    os << "group,mean,samples,empty\n";
    for (const auto& g : a.groups)
        os << g.group << "," << detail::format_double(g.mean) << "," << g.samples << ","
           << (g.empty() ? 1 : 0) << "\n";
}

}  // namespace gcad
