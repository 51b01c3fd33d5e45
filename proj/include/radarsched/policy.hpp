#pragma once

/// Policy network inference.
///
/// The input is a 1 x N_p "image" with N_c = 8 + K channels, one column per
/// task.  Four valid 1x7 convolutions (96 maps, batch norm, ReLU) feed two
/// bias-free fully connected layers (2048 and 1024 units, batch norm, ReLU)
/// and a final affine layer with N_p outputs.  The output is truncated to
/// the active columns and passed through a softmax.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "model.hpp"

namespace radarsched::policy {

inline constexpr int kKernelWidth = 7;
inline constexpr int kConvLayers = 4;
inline constexpr int kConvDepth = 96;
inline constexpr int kHidden1 = 2048;
inline constexpr int kHidden2 = 1024;
inline constexpr int kStatusFeatures = 3;
inline constexpr int kTaskFeatures = 5;
inline constexpr int kDefaultNp = 40;
inline constexpr double kDefaultNormConst = 500.0;
inline constexpr double kBatchNormEpsilon = 1e-5;

inline int channels_for(int K) { return kStatusFeatures + kTaskFeatures + K; }

class ShapeError : public Error {
public:
    using Error::Error;
};

enum class Status { dominated, not_dominated, ignored };

struct FeatureImage {
    int n_p = 0;
    int n_c = 0;
    int active_count = 0;
    std::vector<float> grid;       // n_p x n_c, row-major by column
    std::vector<TaskId> column_task;  // 0 for padding columns
    std::vector<Status> column_status;

    float at(int column, int feature) const
    {
        return grid[static_cast<std::size_t>(column * n_c + feature)];
    }
};

/// Not-dominated tasks first, then dominated ones up to n_p columns; the
/// chosen tasks are sorted by start time (id on ties) and padding goes last.
inline FeatureImage encode_features(std::vector<Task> nd, std::vector<Task> d,
                                    const std::vector<Time>& g, int n_p,
                                    double norm_const = kDefaultNormConst)
{
    if (nd.empty()) throw ArgumentError("encode_features: not-dominated set is empty");
    if (n_p <= 0) throw ArgumentError("encode_features: n_p must be positive");
    if (norm_const <= 0) throw ArgumentError("encode_features: normalisation constant must be positive");
    auto by_start = [](const Task& a, const Task& b) { return a.r != b.r ? a.r < b.r : a.id < b.id; };
    std::sort(nd.begin(), nd.end(), by_start);
    std::sort(d.begin(), d.end(), by_start);

    struct Column {
        Task task;
        Status status;
    };
    std::vector<Column> cols;
    for (const Task& t : nd)
        if (static_cast<int>(cols.size()) < n_p) cols.push_back({t, Status::not_dominated});
    for (const Task& t : d)
        if (static_cast<int>(cols.size()) < n_p) cols.push_back({t, Status::dominated});
    std::stable_sort(cols.begin(), cols.end(),
                     [&](const Column& a, const Column& b) { return by_start(a.task, b.task); });

    FeatureImage img;
    img.n_p = n_p;
    img.n_c = channels_for(static_cast<int>(g.size()));
    img.active_count = static_cast<int>(cols.size());
    img.grid.assign(static_cast<std::size_t>(n_p * img.n_c), 0.0f);
    img.column_task.assign(static_cast<std::size_t>(n_p), 0);
    img.column_status.assign(static_cast<std::size_t>(n_p), Status::ignored);

    auto norm = [&](double v) { return static_cast<float>(std::clamp(v / norm_const, 0.0, 1.0)); };
    for (int c = 0; c < n_p; ++c) {
        float* row = img.grid.data() + static_cast<std::ptrdiff_t>(c * img.n_c);
        if (c >= img.active_count) {
            row[2] = 1.0f;
            continue;
        }
        const Column& col = cols[static_cast<std::size_t>(c)];
        img.column_task[static_cast<std::size_t>(c)] = col.task.id;
        img.column_status[static_cast<std::size_t>(c)] = col.status;
        row[col.status == Status::dominated ? 0 : 1] = 1.0f;
        row[3] = norm(static_cast<double>(col.task.r));
        row[4] = norm(static_cast<double>(col.task.d));
        row[5] = norm(static_cast<double>(col.task.len));
        row[6] = norm(static_cast<double>(col.task.w));
        row[7] = norm(static_cast<double>(col.task.drop));
        for (std::size_t k = 0; k < g.size(); ++k) row[8 + k] = norm(static_cast<double>(g[k]));
    }
    return img;
}

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<float> data;

    std::size_t numel() const
    {
        std::size_t n = 1;
        for (auto s : shape) n *= s;
        return n;
    }
    friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct PolicyWeights {
    int n_p = kDefaultNp;
    int K = 4;
    double norm_const = kDefaultNormConst;
    std::map<std::string, Tensor> tensors;

    int n_c() const { return channels_for(K); }
    int flat_width() const { return n_p - kConvLayers * (kKernelWidth - 1); }

    const Tensor& get(const std::string& name) const
    {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ShapeError("policy weights: missing tensor '" + name + "'");
        return it->second;
    }

    friend bool operator==(const PolicyWeights&, const PolicyWeights&) = default;
};

/// Tensor names in container order together with their expected shapes.
inline std::vector<std::pair<std::string, std::vector<std::size_t>>> expected_layout(int n_p, int K)
{
    using S = std::vector<std::size_t>;
    const auto depth = static_cast<std::size_t>(kConvDepth);
    const auto kw = static_cast<std::size_t>(kKernelWidth);
    std::vector<std::pair<std::string, S>> out;
    auto bn = [&](const std::string& prefix, std::size_t n) {
        for (const char* p : {"gamma", "beta", "mean", "var"}) out.push_back({prefix + ".bn." + p, S{n}});
    };
    for (int l = 1; l <= kConvLayers; ++l) {
        std::size_t in = l == 1 ? static_cast<std::size_t>(channels_for(K)) : depth;
        std::string name = "conv" + std::to_string(l);
        out.push_back({name + ".kernel", S{1, kw, in, depth}});
        bn(name, depth);
    }
    const auto flat = static_cast<std::size_t>(n_p - kConvLayers * (kKernelWidth - 1)) * depth;
    out.push_back({"fc1.weight", S{flat, kHidden1}});
    bn("fc1", kHidden1);
    out.push_back({"fc2.weight", S{kHidden1, kHidden2}});
    bn("fc2", kHidden2);
    out.push_back({"fc3.weight", S{kHidden2, static_cast<std::size_t>(n_p)}});
    out.push_back({"fc3.bias", S{static_cast<std::size_t>(n_p)}});
    return out;
}

inline void check_shapes(const PolicyWeights& w)
{
    if (w.K < 1) throw ShapeError("policy weights: K must be positive");
    if (w.flat_width() <= 0)
        throw ShapeError("policy weights: n_p = " + std::to_string(w.n_p) + " leaves no columns after " +
                         std::to_string(kConvLayers) + " valid convolutions (need n_p > 24)");
    if (!(w.norm_const > 0)) throw ShapeError("policy weights: normalisation constant must be positive");
    auto layout = expected_layout(w.n_p, w.K);
    if (w.tensors.size() != layout.size())
        throw ShapeError("policy weights: expected " + std::to_string(layout.size()) + " tensors, found " +
                         std::to_string(w.tensors.size()));
    for (const auto& [name, shape] : layout) {
        const Tensor& t = w.get(name);
        if (t.shape != shape) {
            std::string want, got;
            for (auto s : shape) want += std::to_string(s) + " ";
            for (auto s : t.shape) got += std::to_string(s) + " ";
            throw ShapeError("policy weights: tensor '" + name + "' has shape [ " + got + "], expected [ " +
                             want + "]");
        }
        if (t.data.size() != t.numel())
            throw ShapeError("policy weights: tensor '" + name + "' data length mismatch");
        if (name.ends_with(".bn.var"))
            for (float v : t.data)
                if (!(v >= 0.0f)) throw ShapeError("policy weights: negative running variance in '" + name + "'");
    }
}

/// He-initialised weights with unit batch norm and a zero output layer, so
/// the network starts out as a uniform policy.
inline PolicyWeights initial_weights(int n_p, int K, std::uint64_t seed,
                                     double norm_const = kDefaultNormConst)
{
    PolicyWeights w;
    w.n_p = n_p;
    w.K = K;
    w.norm_const = norm_const;
    std::mt19937_64 rng(seed);
    for (auto& [name, shape] : expected_layout(n_p, K)) {
        Tensor t{shape, {}};
        t.data.assign(t.numel(), 0.0f);
        if (name.ends_with(".kernel") || name == "fc1.weight" || name == "fc2.weight") {
            std::size_t fan_in = t.numel() / shape.back();
            std::normal_distribution<float> dist(0.0f, static_cast<float>(std::sqrt(2.0 / static_cast<double>(fan_in))));
            for (auto& v : t.data) v = dist(rng);
        } else if (name.ends_with(".gamma") || name.ends_with(".var")) {
            std::fill(t.data.begin(), t.data.end(), 1.0f);
        }
        w.tensors.emplace(name, std::move(t));
    }
    check_shapes(w);
    return w;
}

namespace detail {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// In-place inference batch norm followed by ReLU on every row of x.
inline void batch_norm_relu(RowMatrix& x, const PolicyWeights& w, const std::string& prefix)
{
    const auto& gamma = w.get(prefix + ".bn.gamma").data;
    const auto& beta = w.get(prefix + ".bn.beta").data;
    const auto& mean = w.get(prefix + ".bn.mean").data;
    const auto& var = w.get(prefix + ".bn.var").data;
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const auto cu = static_cast<std::size_t>(c);
        const float scale = static_cast<float>(gamma[cu] / std::sqrt(static_cast<double>(var[cu]) + kBatchNormEpsilon));
        const float shift = beta[cu] - scale * mean[cu];
        x.col(c) = (x.col(c).array() * scale + shift).cwiseMax(0.0f);
    }
}

}  // namespace detail

/// Logits over the n_p output positions (before truncation).
inline std::vector<float> logits(const FeatureImage& img, const PolicyWeights& w)
{
    if (img.n_p != w.n_p || img.n_c != w.n_c())
        throw ShapeError("forward: image is " + std::to_string(img.n_p) + " x " + std::to_string(img.n_c) +
                         ", weights expect " + std::to_string(w.n_p) + " x " + std::to_string(w.n_c()));
    using detail::RowMatrix;
    using Eigen::OuterStride;
    RowMatrix x = Eigen::Map<const RowMatrix>(img.grid.data(), img.n_p, img.n_c);
    for (int l = 1; l <= kConvLayers; ++l) {
        const std::string name = "conv" + std::to_string(l);
        const Tensor& kernel = w.get(name + ".kernel");
        const Eigen::Index in = x.cols();
        const Eigen::Index out_w = x.rows() - (kKernelWidth - 1);
        // Overlapping row windows of the input form the im2col matrix directly.
        Eigen::Map<const RowMatrix, 0, OuterStride<>> patches(x.data(), out_w, kKernelWidth * in,
                                                              OuterStride<>(in));
        Eigen::Map<const RowMatrix> k(kernel.data.data(), kKernelWidth * in, kConvDepth);
        RowMatrix y = patches * k;
        detail::batch_norm_relu(y, w, name);
        x = std::move(y);
    }
    Eigen::Map<const RowMatrix> flat(x.data(), 1, x.size());
    const Tensor& w1 = w.get("fc1.weight");
    RowMatrix h1 = flat * Eigen::Map<const RowMatrix>(w1.data.data(), x.size(), kHidden1);
    detail::batch_norm_relu(h1, w, "fc1");
    const Tensor& w2 = w.get("fc2.weight");
    RowMatrix h2 = h1 * Eigen::Map<const RowMatrix>(w2.data.data(), kHidden1, kHidden2);
    detail::batch_norm_relu(h2, w, "fc2");
    const Tensor& w3 = w.get("fc3.weight");
    const Tensor& b3 = w.get("fc3.bias");
    RowMatrix out = h2 * Eigen::Map<const RowMatrix>(w3.data.data(), kHidden2, w.n_p);
    std::vector<float> z(static_cast<std::size_t>(w.n_p));
    for (int i = 0; i < w.n_p; ++i) z[static_cast<std::size_t>(i)] = out(0, i) + b3.data[static_cast<std::size_t>(i)];
    return z;
}

inline std::vector<double> softmax(std::span<const float> z)
{
    std::vector<double> p(z.size());
    if (z.empty()) return p;
    double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) sum += p[i] = std::exp(static_cast<double>(z[i]) - m);
    for (auto& v : p) v /= sum;
    return p;
}

/// Distribution over the first `active_count` columns.
inline std::vector<double> forward(const FeatureImage& img, const PolicyWeights& w)
{
    auto z = logits(img, w);
    return softmax(std::span<const float>(z).first(static_cast<std::size_t>(img.active_count)));
}

struct Prior {
    std::vector<TaskId> tasks;
    std::vector<double> probs;
    bool fallback = false;  // zero mass on every not-dominated column
};

inline Prior uniform_prior(const std::vector<TaskId>& nd)
{
    return {nd, std::vector<double>(nd.size(), nd.empty() ? 0.0 : 1.0 / static_cast<double>(nd.size())), false};
}

/// Network output restricted to the not-dominated tasks and renormalised.
/// Entries follow the order of `nd`; tasks that did not fit in the image
/// get zero.
inline Prior prior_over(const std::vector<Task>& nd, const std::vector<Task>& d,
                        const std::vector<Time>& g, const PolicyWeights& w)
{
    if (nd.empty()) throw ArgumentError("prior_over: not-dominated set is empty");
    if (static_cast<int>(g.size()) != w.K)
        throw ShapeError("prior_over: " + std::to_string(g.size()) + " channels, weights trained for " +
                         std::to_string(w.K));
    std::vector<TaskId> ids;
    for (const Task& t : nd) ids.push_back(t.id);
    if (nd.size() == 1) return {ids, {1.0}, false};

    auto img = encode_features(nd, d, g, w.n_p, w.norm_const);
    auto p = forward(img, w);
    std::map<TaskId, double> mass;
    for (int c = 0; c < img.active_count; ++c)
        if (img.column_status[static_cast<std::size_t>(c)] == Status::not_dominated)
            mass[img.column_task[static_cast<std::size_t>(c)]] = p[static_cast<std::size_t>(c)];
    Prior out{ids, {}, false};
    double total = 0.0;
    for (TaskId id : ids) {
        auto it = mass.find(id);
        out.probs.push_back(it == mass.end() ? 0.0 : it->second);
        total += out.probs.back();
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        out = uniform_prior(ids);
        out.fallback = true;
        return out;
    }
    for (auto& v : out.probs) v /= total;
    return out;
}

}  // namespace radarsched::policy
