#include "mlp.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace etsdm {

namespace {

double silu(double a) { return a / (1.0 + std::exp(-a)); }
double silu_grad(double a) {
    const double s = 1.0 / (1.0 + std::exp(-a));
    return s * (1.0 + a * (1.0 - s));
}

void write_mat(std::ostream& os, const Mat& m) {
    const int64_t r = m.rows(), c = m.cols();
    os.write(reinterpret_cast<const char*>(&r), sizeof(r));
    os.write(reinterpret_cast<const char*>(&c), sizeof(c));
    os.write(reinterpret_cast<const char*>(m.data()), sizeof(double) * r * c);
}

Mat read_mat(std::istream& is) {
    int64_t r = 0, c = 0;
    is.read(reinterpret_cast<char*>(&r), sizeof(r));
    is.read(reinterpret_cast<char*>(&c), sizeof(c));
    if (!is || r < 0 || c < 0 || r * c > (int64_t(1) << 32))
        throw std::runtime_error("mlp: corrupt checkpoint matrix header");
    Mat m(r, c);
    is.read(reinterpret_cast<char*>(m.data()), sizeof(double) * r * c);
    if (!is) throw std::runtime_error("mlp: truncated checkpoint matrix");
    return m;
}

}  // namespace

Mlp::Mlp(MlpSpec spec, uint64_t seed) : spec_(std::move(spec)) {
    if (spec_.embedding_dim < 2 || spec_.embedding_dim % 2 != 0)
        throw std::invalid_argument("mlp: embedding_dim must be even and positive");
    for (int w : spec_.hidden)
        if (w < 1) throw std::invalid_argument("mlp: layer widths must be >= 1");
    const int half = spec_.embedding_dim / 2;
    inv_freqs_.resize(static_cast<size_t>(half));
    for (int i = 0; i < half; ++i) {
        // Frequencies geometric from 1 to 1e4.
        const double freq = (half == 1) ? 1.0 : std::pow(1e4, static_cast<double>(i) / (half - 1));
        inv_freqs_[static_cast<size_t>(i)] = 1.0 / freq;
    }

    Rng rng(seed);
    int in = input_dim();
    std::vector<int> outs = spec_.hidden;
    outs.push_back(spec_.data_dim);
    for (int out : outs) {
        Layer layer;
        layer.W = Mat(out, in);
        const double scale = std::sqrt(2.0 / in);
        for (int i = 0; i < out; ++i)
            for (int j = 0; j < in; ++j) layer.W(i, j) = scale * rng.normal();
        layer.b = Vec::Zero(out);
        layers_.push_back(std::move(layer));
        in = out;
    }
}

int Mlp::input_dim() const { return spec_.data_dim + spec_.embedding_dim; }

Mat Mlp::embed(const Vec& conds) const {
    const int half = spec_.embedding_dim / 2;
    Mat emb(conds.size(), spec_.embedding_dim);
    for (Eigen::Index i = 0; i < conds.size(); ++i) {
        const double v = spec_.cond_scale * conds[i];
        for (int k = 0; k < half; ++k) {
            emb(i, 2 * k) = std::sin(v * inv_freqs_[static_cast<size_t>(k)]);
            emb(i, 2 * k + 1) = std::cos(v * inv_freqs_[static_cast<size_t>(k)]);
        }
    }
    return emb;
}

Mat Mlp::forward(const Mat& X, const Vec& conds) const {
    Cache cache;
    return forward_cached(X, conds, cache);
}

Mat Mlp::forward_cached(const Mat& X, const Vec& conds, Cache& cache) const {
    if (X.cols() != spec_.data_dim) throw std::invalid_argument("mlp: bad input dimension");
    if (conds.size() != X.rows()) throw std::invalid_argument("mlp: conds/batch size mismatch");
    cache.input.resize(X.rows(), input_dim());
    cache.input << X, embed(conds);
    cache.pre.clear();
    cache.post.clear();
    Mat z = cache.input;
    for (size_t l = 0; l < layers_.size(); ++l) {
        Mat a = (z * layers_[l].W.transpose()).rowwise() + layers_[l].b.transpose();
        cache.pre.push_back(a);
        if (l + 1 < layers_.size()) {
            if (spec_.activation == Activation::SiLU)
                z = a.unaryExpr([](double v) { return silu(v); });
            else
                z = a.cwiseMax(0.0);
        } else {
            z = a;  // linear output layer
        }
        cache.post.push_back(z);
    }
    return z;
}

void Mlp::backward(const Cache& cache, const Mat& d_out, std::vector<Layer>& grads) const {
    if (grads.size() != layers_.size()) throw std::invalid_argument("mlp: grads shape mismatch");
    Mat delta = d_out;
    for (size_t l = layers_.size(); l-- > 0;) {
        const Mat& z_prev = (l == 0) ? cache.input : cache.post[l - 1];
        grads[l].W += delta.transpose() * z_prev;
        grads[l].b += delta.colwise().sum().transpose();
        if (l == 0) break;
        Mat d_prev = delta * layers_[l].W;
        const Mat& a = cache.pre[l - 1];
        if (spec_.activation == Activation::SiLU)
            delta = d_prev.cwiseProduct(a.unaryExpr([](double v) { return silu_grad(v); }));
        else
            delta = d_prev.cwiseProduct(
                a.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    }
}

std::vector<Mlp::Layer> Mlp::zero_like() const {
    std::vector<Layer> grads;
    grads.reserve(layers_.size());
    for (const Layer& l : layers_)
        grads.push_back({Mat::Zero(l.W.rows(), l.W.cols()), Vec::Zero(l.b.size())});
    return grads;
}

void Mlp::save(std::ostream& os) const {
    const int32_t act = spec_.activation == Activation::SiLU ? 0 : 1;
    const int32_t data_dim = spec_.data_dim;
    const int32_t emb = spec_.embedding_dim;
    const int32_t n_hidden = static_cast<int32_t>(spec_.hidden.size());
    os.write(reinterpret_cast<const char*>(&data_dim), sizeof(data_dim));
    os.write(reinterpret_cast<const char*>(&emb), sizeof(emb));
    os.write(reinterpret_cast<const char*>(&act), sizeof(act));
    os.write(reinterpret_cast<const char*>(&spec_.cond_scale), sizeof(double));
    os.write(reinterpret_cast<const char*>(&n_hidden), sizeof(n_hidden));
    for (int w : spec_.hidden) {
        const int32_t w32 = w;
        os.write(reinterpret_cast<const char*>(&w32), sizeof(w32));
    }
    for (const Layer& l : layers_) {
        write_mat(os, l.W);
        write_mat(os, l.b);
    }
}

Mlp Mlp::load(std::istream& is) {
    MlpSpec spec;
    int32_t data_dim = 0, emb = 0, act = 0, n_hidden = 0;
    is.read(reinterpret_cast<char*>(&data_dim), sizeof(data_dim));
    is.read(reinterpret_cast<char*>(&emb), sizeof(emb));
    is.read(reinterpret_cast<char*>(&act), sizeof(act));
    is.read(reinterpret_cast<char*>(&spec.cond_scale), sizeof(double));
    is.read(reinterpret_cast<char*>(&n_hidden), sizeof(n_hidden));
    if (!is) throw std::runtime_error("mlp: corrupt checkpoint header");
    spec.data_dim = data_dim;
    spec.embedding_dim = emb;
    spec.activation = act == 0 ? Activation::SiLU : Activation::ReLU;
    spec.hidden.clear();
    for (int i = 0; i < n_hidden; ++i) {
        int32_t w = 0;
        is.read(reinterpret_cast<char*>(&w), sizeof(w));
        spec.hidden.push_back(w);
    }
    Mlp net(spec, 0);
    for (Layer& l : net.layers_) {
        l.W = read_mat(is);
        Mat b = read_mat(is);
        l.b = b.col(0);
    }
    return net;
}

}  // namespace etsdm
