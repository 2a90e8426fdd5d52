#include "vrls/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vrls::nn {

using nlohmann::json;

LayerSpec LayerSpec::conv1d(std::size_t filters, std::size_t kernel, std::size_t stride) {
    LayerSpec s;
    s.kind = Kind::Conv1D;
    s.filters = filters;
    s.kernel = kernel;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::conv2d(std::size_t filters, std::size_t kernel_h, std::size_t kernel_w, std::size_t stride) {
    LayerSpec s;
    s.kind = Kind::Conv2D;
    s.filters = filters;
    s.kernel = kernel_h;
    s.kernel_w = kernel_w;
    s.stride = stride;
    return s;
}

LayerSpec LayerSpec::dense(std::size_t units) {
    LayerSpec s;
    s.kind = Kind::Dense;
    s.units = units;
    return s;
}

LayerSpec LayerSpec::act(ActivationKind a) {
    LayerSpec s;
    s.kind = Kind::Act;
    s.activation = a;
    return s;
}

LayerSpec LayerSpec::columns(std::vector<LayerSpec> branch) {
    LayerSpec s;
    s.kind = Kind::Columns;
    s.branch = std::move(branch);
    return s;
}

LayerSpec LayerSpec::scale(std::vector<double> factors) {
    LayerSpec s;
    s.kind = Kind::Scale;
    s.factors = std::move(factors);
    return s;
}

namespace {

const char* activation_name(ActivationKind a) {
    switch (a) {
        case ActivationKind::Tanh: return "tanh";
        case ActivationKind::Softmax: return "softmax";
        case ActivationKind::Linear: return "linear";
    }
    return "?";
}

}  // namespace

json to_json(const LayerSpec& s) {
    switch (s.kind) {
        case LayerSpec::Kind::Conv1D:
            return {{"kind", "conv1d"}, {"filters", s.filters}, {"kernel", s.kernel}, {"stride", s.stride}};
        case LayerSpec::Kind::Conv2D:
            return {{"kind", "conv2d"},
                    {"filters", s.filters},
                    {"kernel_h", s.kernel},
                    {"kernel_w", s.kernel_w},
                    {"stride", s.stride}};
        case LayerSpec::Kind::Dense: return {{"kind", "dense"}, {"units", s.units}};
        case LayerSpec::Kind::Act: return {{"kind", "act"}, {"activation", activation_name(s.activation)}};
        case LayerSpec::Kind::Columns: {
            json branch = json::array();
            for (const auto& b : s.branch) branch.push_back(to_json(b));
            return {{"kind", "columns"}, {"branch", branch}};
        }
        case LayerSpec::Kind::Scale: return {{"kind", "scale"}, {"factors", s.factors}};
    }
    return {};
}

LayerSpec layer_spec_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "conv1d")
        return LayerSpec::conv1d(j.at("filters").get<std::size_t>(), j.at("kernel").get<std::size_t>(),
                                 j.at("stride").get<std::size_t>());
    if (kind == "conv2d")
        return LayerSpec::conv2d(j.at("filters").get<std::size_t>(), j.at("kernel_h").get<std::size_t>(),
                                 j.at("kernel_w").get<std::size_t>(), j.at("stride").get<std::size_t>());
    if (kind == "dense") return LayerSpec::dense(j.at("units").get<std::size_t>());
    if (kind == "act") {
        const auto a = j.at("activation").get<std::string>();
        if (a == "tanh") return LayerSpec::act(ActivationKind::Tanh);
        if (a == "softmax") return LayerSpec::act(ActivationKind::Softmax);
        if (a == "linear") return LayerSpec::act(ActivationKind::Linear);
        throw std::invalid_argument("unknown activation '" + a + "'");
    }
    if (kind == "columns") {
        std::vector<LayerSpec> branch;
        for (const auto& b : j.at("branch")) branch.push_back(layer_spec_from_json(b));
        return LayerSpec::columns(std::move(branch));
    }
    if (kind == "scale") return LayerSpec::scale(j.at("factors").get<std::vector<double>>());
    throw std::invalid_argument("unknown layer kind '" + kind + "'");
}

// ---------------------------------------------------------------------------

void Layer::initialize(std::span<Tensor> params, std::mt19937_64&) const {
    for (auto& p : params) p.fill(0.0);
}

namespace {

void glorot(Tensor& w, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& v : w.values()) v = u(rng);
}

void expect_shape(const Tensor& t, const Shape& shape, const char* who) {
    if (t.shape() != shape)
        throw std::invalid_argument(std::string(who) + ": expected input " + to_string(shape) + ", got " +
                                    to_string(t.shape()));
}

std::size_t same_out(std::size_t n, std::size_t stride) { return (n - 1) / stride + 1; }

class Conv1D final : public Layer {
public:
    Conv1D(const LayerSpec& s, const Shape& in) : in_(in), filters_(s.filters), kernel_(s.kernel), stride_(s.stride) {
        if (in.size() != 2) throw std::invalid_argument("conv1d expects [channels, length] input");
        if (kernel_ % 2 == 0 || stride_ == 0 || filters_ == 0) throw std::invalid_argument("conv1d needs odd kernel");
        out_ = {filters_, same_out(in[1], stride_)};
    }

    const Shape& output_shape() const override { return out_; }
    std::vector<Shape> parameter_shapes() const override { return {{filters_, in_[0], kernel_}, {filters_}}; }

    void initialize(std::span<Tensor> p, std::mt19937_64& rng) const override {
        glorot(p[0], in_[0] * kernel_, filters_ * kernel_, rng);
        p[1].fill(0.0);
    }

    Tensor forward(const Tensor& in, std::span<const Tensor> p, LayerCache& cache) const override {
        expect_shape(in, in_, "conv1d");
        const std::size_t C = in_[0], L = in_[1], Lo = out_[1];
        const long pad = static_cast<long>(kernel_ - 1) / 2;
        Tensor out(out_);
        for (std::size_t f = 0; f < filters_; ++f) {
            for (std::size_t o = 0; o < Lo; ++o) {
                double acc = p[1][f];
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t k = 0; k < kernel_; ++k) {
                        const long i = static_cast<long>(o * stride_ + k) - pad;
                        if (i < 0 || i >= static_cast<long>(L)) continue;
                        acc += p[0].at(f, c, k) * in.at(c, static_cast<std::size_t>(i));
                    }
                }
                out.at(f, o) = acc;
            }
        }
        cache.saved = {in};
        return out;
    }

    Tensor backward(const LayerCache& cache, const Tensor& g, std::span<const Tensor> p,
                    std::span<Tensor> grads) const override {
        const Tensor& in = cache.saved.at(0);
        const std::size_t C = in_[0], L = in_[1], Lo = out_[1];
        const long pad = static_cast<long>(kernel_ - 1) / 2;
        Tensor gin(in_);
        for (std::size_t f = 0; f < filters_; ++f) {
            for (std::size_t o = 0; o < Lo; ++o) {
                const double go = g.at(f, o);
                if (go == 0.0) continue;
                grads[1][f] += go;
                for (std::size_t c = 0; c < C; ++c) {
                    for (std::size_t k = 0; k < kernel_; ++k) {
                        const long i = static_cast<long>(o * stride_ + k) - pad;
                        if (i < 0 || i >= static_cast<long>(L)) continue;
                        grads[0].at(f, c, k) += go * in.at(c, static_cast<std::size_t>(i));
                        gin.at(c, static_cast<std::size_t>(i)) += go * p[0].at(f, c, k);
                    }
                }
            }
        }
        return gin;
    }

private:
    Shape in_, out_;
    std::size_t filters_, kernel_, stride_;
};

class Conv2D final : public Layer {
public:
    Conv2D(const LayerSpec& s, const Shape& in)
        : in_(in), filters_(s.filters), kh_(s.kernel), kw_(s.kernel_w), stride_(s.stride) {
        if (in.size() != 3) throw std::invalid_argument("conv2d expects [channels, height, width] input");
        if (kh_ % 2 == 0 || kw_ % 2 == 0 || stride_ == 0 || filters_ == 0)
            throw std::invalid_argument("conv2d needs odd kernels");
        out_ = {filters_, same_out(in[1], stride_), same_out(in[2], stride_)};
    }

    const Shape& output_shape() const override { return out_; }
    std::vector<Shape> parameter_shapes() const override { return {{filters_, in_[0], kh_, kw_}, {filters_}}; }

    void initialize(std::span<Tensor> p, std::mt19937_64& rng) const override {
        glorot(p[0], in_[0] * kh_ * kw_, filters_ * kh_ * kw_, rng);
        p[1].fill(0.0);
    }

    Tensor forward(const Tensor& in, std::span<const Tensor> p, LayerCache& cache) const override {
        expect_shape(in, in_, "conv2d");
        Tensor out(out_);
        const double* x = in.values().data();
        double* y = out.values().data();
        const std::size_t plane = out_[1] * out_[2];
        for (std::size_t f = 0; f < filters_; ++f) std::fill_n(y + f * plane, plane, p[1][f]);
        visit([&](std::size_t, double w, std::size_t o, std::size_t xi, std::size_t n) {
            if (stride_ == 1) {
                for (std::size_t k = 0; k < n; ++k) y[o + k] += w * x[xi + k];
            } else {
                for (std::size_t k = 0; k < n; ++k) y[o + k] += w * x[xi + k * stride_];
            }
        }, p[0]);
        cache.saved = {in};
        return out;
    }

    Tensor backward(const LayerCache& cache, const Tensor& g, std::span<const Tensor> p,
                    std::span<Tensor> grads) const override {
        const Tensor& in = cache.saved.at(0);
        Tensor gin(in_);
        const double* x = in.values().data();
        const double* go = g.values().data();
        double* gx = gin.values().data();
        double* gw = grads[0].values().data();
        const std::size_t plane = out_[1] * out_[2];
        for (std::size_t f = 0; f < filters_; ++f)
            for (std::size_t k = 0; k < plane; ++k) grads[1][f] += go[f * plane + k];
        std::size_t wi = 0;
        visit([&](std::size_t, double w, std::size_t o, std::size_t xi, std::size_t n) {
            double acc = 0.0;
            if (stride_ == 1) {
                for (std::size_t k = 0; k < n; ++k) {
                    acc += go[o + k] * x[xi + k];
                    gx[xi + k] += go[o + k] * w;
                }
            } else {
                for (std::size_t k = 0; k < n; ++k) {
                    acc += go[o + k] * x[xi + k * stride_];
                    gx[xi + k * stride_] += go[o + k] * w;
                }
            }
            gw[wi] += acc;
        }, p[0], &wi);
        return gin;
    }

private:
    // Output positions oo in [lo, hi) whose tap at kernel offset `a` lands inside [0, n).
    static void valid(std::size_t a, std::size_t k, std::size_t stride, std::size_t n, std::size_t n_out,
                      std::size_t& lo, std::size_t& hi) {
        const long pad = static_cast<long>(k - 1) / 2;
        const long s = static_cast<long>(stride);
        const long shift = static_cast<long>(a) - pad;  // input = oo * stride + shift
        long l = shift < 0 ? (-shift + s - 1) / s : 0;
        long h = (static_cast<long>(n) - 1 - shift) / s + 1;
        if (static_cast<long>(n) - 1 - shift < 0) h = 0;
        h = std::min(h, static_cast<long>(n_out));
        lo = static_cast<std::size_t>(l);
        hi = static_cast<std::size_t>(std::max(l, h));
    }

    // For every weight (f, c, a, b) and output row, calls
    // fn(f, weight, first output index, first input index, run length); the
    // run covers consecutive output columns, the input advancing by stride.
    // `weight_index`, when given, tracks the flat index of the current weight.
    template <typename Fn>
    void visit(Fn&& fn, const Tensor& weights, std::size_t* weight_index = nullptr) const {
        const std::size_t C = in_[0], H = in_[1], W = in_[2], Ho = out_[1], Wo = out_[2];
        const long ph = static_cast<long>(kh_ - 1) / 2, pw = static_cast<long>(kw_ - 1) / 2;
        std::size_t wi = 0;
        for (std::size_t f = 0; f < filters_; ++f)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t a = 0; a < kh_; ++a) {
                    std::size_t i_lo, i_hi;
                    valid(a, kh_, stride_, H, Ho, i_lo, i_hi);
                    for (std::size_t b = 0; b < kw_; ++b, ++wi) {
                        std::size_t j_lo, j_hi;
                        valid(b, kw_, stride_, W, Wo, j_lo, j_hi);
                        if (weight_index) *weight_index = wi;
                        const double w = weights[wi];
                        for (std::size_t oi = i_lo; oi < i_hi; ++oi) {
                            const auto i = static_cast<std::size_t>(static_cast<long>(oi * stride_ + a) - ph);
                            const auto j = static_cast<std::size_t>(static_cast<long>(j_lo * stride_ + b) - pw);
                            if (j_hi > j_lo) fn(f, w, (f * Ho + oi) * Wo + j_lo, (c * H + i) * W + j, j_hi - j_lo);
                        }
                    }
                }
    }

    Shape in_, out_;
    std::size_t filters_, kh_, kw_, stride_;
};

class Dense final : public Layer {
public:
    Dense(const LayerSpec& s, const Shape& in) : in_(in), n_(element_count(in)), units_(s.units), out_{s.units} {
        if (units_ == 0) throw std::invalid_argument("dense layer needs at least one unit");
    }

    const Shape& output_shape() const override { return out_; }
    std::vector<Shape> parameter_shapes() const override { return {{units_, n_}, {units_}}; }

    void initialize(std::span<Tensor> p, std::mt19937_64& rng) const override {
        glorot(p[0], n_, units_, rng);
        p[1].fill(0.0);
    }

    Tensor forward(const Tensor& in, std::span<const Tensor> p, LayerCache& cache) const override {
        expect_shape(in, in_, "dense");
        Tensor out(out_);
        const double* w = p[0].values().data();
        for (std::size_t u = 0; u < units_; ++u) {
            double acc = p[1][u];
            const double* row = w + u * n_;
            for (std::size_t k = 0; k < n_; ++k) acc += row[k] * in[k];
            out[u] = acc;
        }
        cache.saved = {in};
        return out;
    }

    Tensor backward(const LayerCache& cache, const Tensor& g, std::span<const Tensor> p,
                    std::span<Tensor> grads) const override {
        const Tensor& in = cache.saved.at(0);
        Tensor gin(in_);
        const double* w = p[0].values().data();
        double* gw = grads[0].values().data();
        for (std::size_t u = 0; u < units_; ++u) {
            const double go = g[u];
            if (go == 0.0) continue;
            grads[1][u] += go;
            const double* row = w + u * n_;
            double* grow = gw + u * n_;
            for (std::size_t k = 0; k < n_; ++k) {
                grow[k] += go * in[k];
                gin[k] += go * row[k];
            }
        }
        return gin;
    }

private:
    Shape in_;
    std::size_t n_, units_;
    Shape out_;
};

class Activation final : public Layer {
public:
    Activation(ActivationKind kind, const Shape& in) : kind_(kind), shape_(in) {}

    const Shape& output_shape() const override { return shape_; }

    Tensor forward(const Tensor& in, std::span<const Tensor>, LayerCache& cache) const override {
        expect_shape(in, shape_, "activation");
        Tensor out = in;
        switch (kind_) {
            case ActivationKind::Linear: break;
            case ActivationKind::Tanh:
                for (auto& v : out.values()) v = std::tanh(v);
                break;
            case ActivationKind::Softmax: {
                const double top = *std::max_element(out.values().begin(), out.values().end());
                double sum = 0.0;
                for (auto& v : out.values()) sum += (v = std::exp(v - top));
                for (auto& v : out.values()) v /= sum;
                break;
            }
        }
        cache.saved = {out};
        return out;
    }

    Tensor backward(const LayerCache& cache, const Tensor& g, std::span<const Tensor>,
                    std::span<Tensor>) const override {
        const Tensor& y = cache.saved.at(0);
        Tensor gin = g;
        switch (kind_) {
            case ActivationKind::Linear: break;
            case ActivationKind::Tanh:
                for (std::size_t i = 0; i < gin.size(); ++i) gin[i] = g[i] * (1.0 - y[i] * y[i]);
                break;
            case ActivationKind::Softmax: {
                double dot = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * g[i];
                for (std::size_t i = 0; i < y.size(); ++i) gin[i] = y[i] * (g[i] - dot);
                break;
            }
        }
        return gin;
    }

private:
    ActivationKind kind_;
    Shape shape_;
};

class Scale final : public Layer {
public:
    Scale(const LayerSpec& s, const Shape& in) : factors_(s.factors), shape_(in) {
        if (in.empty() || in.back() != factors_.size())
            throw std::invalid_argument("scale needs one factor per index of the last axis");
    }

    const Shape& output_shape() const override { return shape_; }

    Tensor forward(const Tensor& in, std::span<const Tensor>, LayerCache&) const override {
        expect_shape(in, shape_, "scale");
        return apply(in);
    }

    Tensor backward(const LayerCache&, const Tensor& g, std::span<const Tensor>, std::span<Tensor>) const override {
        return apply(g);
    }

private:
    Tensor apply(Tensor t) const {
        const std::size_t k = factors_.size();
        for (std::size_t i = 0; i < t.size(); ++i) t[i] *= factors_[i % k];
        return t;
    }

    std::vector<double> factors_;
    Shape shape_;
};

class Columns final : public Layer {
public:
    Columns(const LayerSpec& s, const Shape& in) : in_(in) {
        if (in.size() != 2) throw std::invalid_argument("columns expects [rows, cols] input");
        const Shape column_shape{1, in[0]};
        for (std::size_t c = 0; c < in[1]; ++c) {
            Branch b;
            Shape shape = column_shape;
            for (const auto& spec : s.branch) {
                b.layers.push_back(make_layer(spec, shape));
                shape = b.layers.back()->output_shape();
            }
            if (shape.size() != 2) throw std::invalid_argument("column branch must end in a [filters, rows] map");
            if (c == 0) out_ = {in[1], shape[1], shape[0]};
            branches_.push_back(std::move(b));
        }
        if (branches_.empty()) throw std::invalid_argument("columns layer on an input without columns");
    }

    const Shape& output_shape() const override { return out_; }

    std::vector<Shape> parameter_shapes() const override {
        std::vector<Shape> shapes;
        for (const auto& b : branches_)
            for (const auto& l : b.layers)
                for (auto& s : l->parameter_shapes()) shapes.push_back(s);
        return shapes;
    }

    void initialize(std::span<Tensor> p, std::mt19937_64& rng) const override {
        std::size_t at = 0;
        for (const auto& b : branches_) {
            for (const auto& l : b.layers) {
                const auto n = l->parameter_shapes().size();
                l->initialize(p.subspan(at, n), rng);
                at += n;
            }
        }
    }

    Tensor forward(const Tensor& in, std::span<const Tensor> p, LayerCache& cache) const override {
        expect_shape(in, in_, "columns");
        const std::size_t R = in_[0], K = in_[1];
        Tensor out(out_);
        cache.children.assign(K, LayerCache{});
        std::size_t at = 0;
        for (std::size_t c = 0; c < K; ++c) {
            Tensor x({1, R});
            for (std::size_t r = 0; r < R; ++r) x[r] = in.at(r, c);
            auto& bc = cache.children[c];
            bc.children.assign(branches_[c].layers.size(), LayerCache{});
            for (std::size_t l = 0; l < branches_[c].layers.size(); ++l) {
                const auto& layer = branches_[c].layers[l];
                const auto n = layer->parameter_shapes().size();
                x = layer->forward(x, p.subspan(at, n), bc.children[l]);
                at += n;
            }
            for (std::size_t r = 0; r < out_[1]; ++r)
                for (std::size_t f = 0; f < out_[2]; ++f) out.at(c, r, f) = x.at(f, r);
        }
        return out;
    }

    Tensor backward(const LayerCache& cache, const Tensor& g, std::span<const Tensor> p,
                    std::span<Tensor> grads) const override {
        const std::size_t R = in_[0], K = in_[1];
        Tensor gin(in_);
        std::size_t at = 0;
        for (std::size_t c = 0; c < K; ++c) {
            const auto& layers = branches_[c].layers;
            std::vector<std::size_t> starts;
            for (const auto& l : layers) {
                starts.push_back(at);
                at += l->parameter_shapes().size();
            }
            Tensor gx({out_[2], out_[1]});
            for (std::size_t r = 0; r < out_[1]; ++r)
                for (std::size_t f = 0; f < out_[2]; ++f) gx.at(f, r) = g.at(c, r, f);
            for (std::size_t l = layers.size(); l-- > 0;) {
                const auto n = layers[l]->parameter_shapes().size();
                gx = layers[l]->backward(cache.children.at(c).children.at(l), gx, p.subspan(starts[l], n),
                                         grads.subspan(starts[l], n));
            }
            for (std::size_t r = 0; r < R; ++r) gin.at(r, c) = gx[r];
        }
        return gin;
    }

private:
    struct Branch {
        std::vector<std::unique_ptr<Layer>> layers;
    };
    Shape in_, out_;
    std::vector<Branch> branches_;
};

}  // namespace

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input) {
    switch (spec.kind) {
        case LayerSpec::Kind::Conv1D: return std::make_unique<Conv1D>(spec, input);
        case LayerSpec::Kind::Conv2D: return std::make_unique<Conv2D>(spec, input);
        case LayerSpec::Kind::Dense: return std::make_unique<Dense>(spec, input);
        case LayerSpec::Kind::Act: return std::make_unique<Activation>(spec.activation, input);
        case LayerSpec::Kind::Columns: return std::make_unique<Columns>(spec, input);
        case LayerSpec::Kind::Scale: return std::make_unique<Scale>(spec, input);
    }
    throw std::invalid_argument("unknown layer kind");
}

// ---------------------------------------------------------------------------

Network::Network(Shape input, std::vector<LayerSpec> specs) : input_(std::move(input)), specs_(std::move(specs)) {
    build();
    for (std::size_t l = 0; l < layers_.size(); ++l)
        for (auto& s : layers_[l]->parameter_shapes()) params_.emplace_back(s, 0.0);
}

Network::Network(const Network& other) : input_(other.input_), specs_(other.specs_), params_(other.params_) { build(); }

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        input_ = other.input_;
        specs_ = other.specs_;
        params_ = other.params_;
        build();
    }
    return *this;
}

void Network::build() {
    layers_.clear();
    offsets_.clear();
    Shape shape = input_;
    std::size_t at = 0;
    for (const auto& s : specs_) {
        layers_.push_back(make_layer(s, shape));
        offsets_.push_back(at);
        at += layers_.back()->parameter_shapes().size();
        shape = layers_.back()->output_shape();
    }
    offsets_.push_back(at);
}

const Shape& Network::output_shape() const { return layers_.empty() ? input_ : layers_.back()->output_shape(); }

void Network::initialize(std::mt19937_64& rng) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l]->initialize(std::span<Tensor>(params_).subspan(offsets_[l], offsets_[l + 1] - offsets_[l]), rng);
    }
}

Tensor Network::forward(const Tensor& input) const {
    ForwardCache scratch;
    return forward(input, scratch);
}

Tensor Network::forward(const Tensor& input, ForwardCache& cache) const {
    if (input.shape() != input_)
        throw std::invalid_argument("network expects input " + to_string(input_) + ", got " + to_string(input.shape()));
    cache.layers.assign(layers_.size(), LayerCache{});
    Tensor x = input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        x = layers_[l]->forward(
            x, std::span<const Tensor>(params_).subspan(offsets_[l], offsets_[l + 1] - offsets_[l]), cache.layers[l]);
    }
    cache.valid = true;
    return x;
}

ParameterSet Network::backward(const ForwardCache& cache, const Tensor& grad_out) const {
    if (!cache.valid || cache.layers.size() != layers_.size())
        throw std::logic_error("backward called without a matching forward cache");
    if (grad_out.shape() != output_shape()) throw std::invalid_argument("output gradient has the wrong shape");
    ParameterSet grads = zeros_like(params_);
    Tensor g = grad_out;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto n = offsets_[l + 1] - offsets_[l];
        g = layers_[l]->backward(cache.layers[l], g, std::span<const Tensor>(params_).subspan(offsets_[l], n),
                                 std::span<Tensor>(grads).subspan(offsets_[l], n));
    }
    return grads;
}

void Network::set_parameters(const ParameterSet& params) {
    if (params.size() != params_.size()) throw std::invalid_argument("parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params[i].shape() != params_[i].shape()) throw std::invalid_argument("parameter shape mismatch");
    params_ = params;
}

json Network::architecture() const {
    json layers = json::array();
    for (const auto& s : specs_) layers.push_back(to_json(s));
    return {{"input", input_}, {"layers", layers}};
}

}  // namespace vrls::nn
