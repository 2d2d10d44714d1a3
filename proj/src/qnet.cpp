#include "regrasp/qnet.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "regrasp/rng.hpp"

namespace regrasp {

namespace {

constexpr uint64_t kStreamQnet = 31;
constexpr char kWeightMagic[4] = {'R', 'G', 'Q', 'W'};
constexpr uint32_t kWeightVersion = 1;

// layer output sides, valid padding
struct Shapes {
    int h1, h2, h3, h4, flat, cat;
};

Shapes shapes_for(const NetConfig& c) {
    if (c.image_size < 8 || c.channels < 1 || c.place_dim < 1 || c.conv1_maps < 1 ||
        c.conv2_maps < 1 || c.kernel < 1 || c.tower_fc < 1 || c.trunk_units < 1)
        throw ConfigError("network geometry fields must be positive (image size at least 8)");
    Shapes s;
    s.h1 = c.image_size - c.kernel + 1;
    s.h2 = s.h1 / 2;
    s.h3 = s.h2 - c.kernel + 1;
    s.h4 = s.h3 / 2;
    if (s.h1 < 2 || s.h3 < 1 || s.h4 < 1)
        throw ConfigError("image too small for two conv/pool stages at this kernel");
    s.flat = c.conv2_maps * s.h4 * s.h4;
    s.cat = 2 * (c.tower_fc + c.place_dim);
    return s;
}

}  // namespace

// parameter enumeration: state tower, action tower, trunk; weights before
// biases within each layer. The weight file and flat indexing both rely on
// this order staying fixed.
template <typename T>
QNet<T>::QNet(const NetConfig& config, uint64_t seed) : config_(config) {
    Shapes s = shapes_for(config);
    auto add = [&](std::array<int, 4> d) { params_.emplace_back(d); };
    for (int tower = 0; tower < 2; ++tower) {
        add({config.conv1_maps, config.channels, config.kernel, config.kernel});
        add({config.conv1_maps, 1, 1, 1});
        add({config.conv2_maps, config.conv1_maps, config.kernel, config.kernel});
        add({config.conv2_maps, 1, 1, 1});
        add({config.tower_fc, s.flat, 1, 1});
        add({config.tower_fc, 1, 1, 1});
    }
    add({config.trunk_units, s.cat, 1, 1});
    add({config.trunk_units, 1, 1, 1});
    add({config.trunk_units, config.trunk_units, 1, 1});
    add({config.trunk_units, 1, 1, 1});
    add({1, config.trunk_units, 1, 1});
    add({1, 1, 1, 1});

    grads_ = params_;
    velocity_ = params_;

    // He-style init on weight tensors, fan-in from the tensor's own dims;
    // biases stay zero
    Rng rng(mix_seed(seed, kStreamQnet));
    for (size_t i = 0; i < params_.size(); i += 2) {
        Tensor<T>& w = params_[i];
        double fan_in = static_cast<double>(w.dims[1]) * w.dims[2] * w.dims[3];
        double stddev = std::sqrt(2.0 / fan_in);
        for (T& x : w.v) x = static_cast<T>(rng.normal(0.0, stddev));
    }
}

template <typename T>
struct QNet<T>::Stack {
    // per tower: conv/pool/fc activations, pre- and post-ReLU
    std::vector<T> a1[2], r1[2], p1[2], a2[2], r2[2], p2[2], f[2], rf[2];
    std::vector<int> i1[2], i2[2];
    std::vector<T> cat, t1, rt1, t2, rt2;

    explicit Stack(const NetConfig& c) {
        Shapes s = shapes_for(c);
        for (int t = 0; t < 2; ++t) {
            a1[t].resize(static_cast<size_t>(c.conv1_maps) * s.h1 * s.h1);
            r1[t].resize(a1[t].size());
            p1[t].resize(static_cast<size_t>(c.conv1_maps) * s.h2 * s.h2);
            i1[t].resize(p1[t].size());
            a2[t].resize(static_cast<size_t>(c.conv2_maps) * s.h3 * s.h3);
            r2[t].resize(a2[t].size());
            p2[t].resize(static_cast<size_t>(s.flat));
            i2[t].resize(p2[t].size());
            f[t].resize(static_cast<size_t>(c.tower_fc));
            rf[t].resize(f[t].size());
        }
        cat.resize(static_cast<size_t>(s.cat));
        t1.resize(static_cast<size_t>(c.trunk_units));
        rt1.resize(t1.size());
        t2.resize(t1.size());
        rt2.resize(t1.size());
    }
};

template <typename T>
T QNet<T>::run(const QSample<T>& sample, Stack* stack) const {
    const NetConfig& c = config_;
    Shapes s = shapes_for(c);
    size_t img_n = static_cast<size_t>(c.channels) * c.image_size * c.image_size;
    if (sample.state_image.size() != img_n || sample.action_image.size() != img_n ||
        sample.state_place.size() != static_cast<size_t>(c.place_dim) ||
        sample.action_place.size() != static_cast<size_t>(c.place_dim))
        throw ContractViolation("sample tensor dims do not match the network config");

    const std::vector<T>* images[2] = {&sample.state_image, &sample.action_image};
    for (int t = 0; t < 2; ++t) {
        const Tensor<T>* p = &params_[static_cast<size_t>(t) * 6];
        nn::conv_forward(images[t]->data(), c.channels, c.image_size, c.image_size, p[0].v.data(),
                         p[1].v.data(), c.conv1_maps, c.kernel, stack->a1[t].data());
        nn::relu_forward(stack->a1[t].data(), stack->a1[t].size(), stack->r1[t].data());
        nn::pool2_forward(stack->r1[t].data(), c.conv1_maps, s.h1, s.h1, stack->p1[t].data(),
                          stack->i1[t].data());
        nn::conv_forward(stack->p1[t].data(), c.conv1_maps, s.h2, s.h2, p[2].v.data(),
                         p[3].v.data(), c.conv2_maps, c.kernel, stack->a2[t].data());
        nn::relu_forward(stack->a2[t].data(), stack->a2[t].size(), stack->r2[t].data());
        nn::pool2_forward(stack->r2[t].data(), c.conv2_maps, s.h3, s.h3, stack->p2[t].data(),
                          stack->i2[t].data());
        nn::fc_forward(stack->p2[t].data(), s.flat, p[4].v.data(), p[5].v.data(), c.tower_fc,
                       stack->f[t].data());
        nn::relu_forward(stack->f[t].data(), stack->f[t].size(), stack->rf[t].data());
    }

    // trunk input: [state tower, state place, action tower, action place]
    T* cat = stack->cat.data();
    std::memcpy(cat, stack->rf[0].data(), sizeof(T) * c.tower_fc);
    std::memcpy(cat + c.tower_fc, sample.state_place.data(), sizeof(T) * c.place_dim);
    std::memcpy(cat + c.tower_fc + c.place_dim, stack->rf[1].data(), sizeof(T) * c.tower_fc);
    std::memcpy(cat + 2 * c.tower_fc + c.place_dim, sample.action_place.data(),
                sizeof(T) * c.place_dim);

    const Tensor<T>* tr = &params_[12];
    nn::fc_forward(cat, s.cat, tr[0].v.data(), tr[1].v.data(), c.trunk_units, stack->t1.data());
    nn::relu_forward(stack->t1.data(), stack->t1.size(), stack->rt1.data());
    nn::fc_forward(stack->rt1.data(), c.trunk_units, tr[2].v.data(), tr[3].v.data(), c.trunk_units,
                   stack->t2.data());
    nn::relu_forward(stack->t2.data(), stack->t2.size(), stack->rt2.data());
    T out;
    nn::fc_forward(stack->rt2.data(), c.trunk_units, tr[4].v.data(), tr[5].v.data(), 1, &out);
    return out;
}

template <typename T>
T QNet<T>::forward(const QSample<T>& sample) const {
    Stack stack(config_);
    return run(sample, &stack);
}

template <typename T>
double QNet<T>::backward(const std::vector<QSample<T>>& batch) {
    if (batch.empty()) throw ContractViolation("backward needs a nonempty batch");
    for (const QSample<T>& b : batch)
        if (!std::isfinite(static_cast<double>(b.target)))
            throw ContractViolation("non-finite training target");

    const NetConfig& c = config_;
    Shapes s = shapes_for(c);
    for (Tensor<T>& g : grads_) std::fill(g.v.begin(), g.v.end(), T(0));

    Stack stack(config_);
    Stack d(config_);  // gradient mirror of the activations
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    for (const QSample<T>& item : batch) {
        T q = run(item, &stack);
        double err = static_cast<double>(q) - static_cast<double>(item.target);
        loss += err * err * inv_n;
        T dq = static_cast<T>(2.0 * err * inv_n);

        auto zero = [](std::vector<T>& v) { std::fill(v.begin(), v.end(), T(0)); };
        zero(d.cat), zero(d.t1), zero(d.rt1), zero(d.t2), zero(d.rt2);
        for (int t = 0; t < 2; ++t) {
            zero(d.a1[t]), zero(d.r1[t]), zero(d.p1[t]);
            zero(d.a2[t]), zero(d.r2[t]), zero(d.p2[t]);
            zero(d.f[t]), zero(d.rf[t]);
        }

        Tensor<T>* tr = &params_[12];
        Tensor<T>* gtr = &grads_[12];
        nn::fc_backward(stack.rt2.data(), c.trunk_units, tr[4].v.data(), 1, &dq, d.rt2.data(),
                        gtr[4].v.data(), gtr[5].v.data());
        nn::relu_backward(stack.t2.data(), d.rt2.data(), stack.t2.size(), d.t2.data());
        nn::fc_backward(stack.rt1.data(), c.trunk_units, tr[2].v.data(), c.trunk_units,
                        d.t2.data(), d.rt1.data(), gtr[2].v.data(), gtr[3].v.data());
        nn::relu_backward(stack.t1.data(), d.rt1.data(), stack.t1.size(), d.t1.data());
        nn::fc_backward(stack.cat.data(), s.cat, tr[0].v.data(), c.trunk_units, d.t1.data(),
                        d.cat.data(), gtr[0].v.data(), gtr[1].v.data());

        const std::vector<T>* images[2] = {&item.state_image, &item.action_image};
        std::vector<T> dimg(static_cast<size_t>(c.channels) * c.image_size * c.image_size);
        for (int t = 0; t < 2; ++t) {
            const T* dcat = d.cat.data() + static_cast<size_t>(t) * (c.tower_fc + c.place_dim);
            std::memcpy(d.rf[t].data(), dcat, sizeof(T) * c.tower_fc);
            Tensor<T>* p = &params_[static_cast<size_t>(t) * 6];
            Tensor<T>* g = &grads_[static_cast<size_t>(t) * 6];
            nn::relu_backward(stack.f[t].data(), d.rf[t].data(), stack.f[t].size(), d.f[t].data());
            nn::fc_backward(stack.p2[t].data(), s.flat, p[4].v.data(), c.tower_fc, d.f[t].data(),
                            d.p2[t].data(), g[4].v.data(), g[5].v.data());
            nn::pool2_backward(d.p2[t].data(), c.conv2_maps, s.h3, s.h3, stack.i2[t].data(),
                               d.r2[t].data());
            nn::relu_backward(stack.a2[t].data(), d.r2[t].data(), stack.a2[t].size(),
                              d.a2[t].data());
            nn::conv_backward(stack.p1[t].data(), c.conv1_maps, s.h2, s.h2, p[2].v.data(),
                              c.conv2_maps, c.kernel, d.a2[t].data(), d.p1[t].data(),
                              g[2].v.data(), g[3].v.data());
            nn::pool2_backward(d.p1[t].data(), c.conv1_maps, s.h1, s.h1, stack.i1[t].data(),
                               d.r1[t].data());
            nn::relu_backward(stack.a1[t].data(), d.r1[t].data(), stack.a1[t].size(),
                              d.a1[t].data());
            std::fill(dimg.begin(), dimg.end(), T(0));
            nn::conv_backward(images[t]->data(), c.channels, c.image_size, c.image_size,
                              p[0].v.data(), c.conv1_maps, c.kernel, d.a1[t].data(), dimg.data(),
                              g[0].v.data(), g[1].v.data());
        }
    }
    return loss;
}

template <typename T>
void QNet<T>::sgd_step(const SgdConfig& sgd) {
    if (sgd.batch_size < 1) throw ParameterError("sgd batch size must be at least 1");
    for (size_t i = 0; i < params_.size(); ++i)
        nn::sgd_update(params_[i].v.data(), velocity_[i].v.data(), grads_[i].v.data(),
                       params_[i].size(), static_cast<T>(sgd.learning_rate),
                       static_cast<T>(sgd.momentum));
}

template <typename T>
size_t QNet<T>::param_count() const {
    size_t n = 0;
    for (const Tensor<T>& t : params_) n += t.size();
    return n;
}

template <typename T>
T QNet<T>::param(size_t i) const {
    for (const Tensor<T>& t : params_) {
        if (i < t.size()) return t.v[i];
        i -= t.size();
    }
    throw ParameterError("parameter index out of range");
}

template <typename T>
void QNet<T>::set_param(size_t i, T value) {
    for (Tensor<T>& t : params_) {
        if (i < t.size()) {
            t.v[i] = value;
            return;
        }
        i -= t.size();
    }
    throw ParameterError("parameter index out of range");
}

template <typename T>
T QNet<T>::grad(size_t i) const {
    for (const Tensor<T>& t : grads_) {
        if (i < t.size()) return t.v[i];
        i -= t.size();
    }
    throw ParameterError("parameter index out of range");
}

template class QNet<float>;
template class QNet<double>;

namespace {

template <typename T>
void save_weights_t(const QNet<T>& net, const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    auto put = [&](const void* p, size_t n) {
        if (std::fwrite(p, 1, n, f) != n) {
            std::fclose(f);
            throw IoError("short write: " + path);
        }
    };
    put(kWeightMagic, 4);
    put(&kWeightVersion, 4);
    const NetConfig& c = net.config();
    int32_t geo[8] = {c.image_size, c.channels,  c.place_dim, c.conv1_maps,
                      c.conv2_maps, c.kernel,    c.tower_fc,  c.trunk_units};
    put(geo, sizeof geo);
    uint32_t count = static_cast<uint32_t>(net.tensors().size());
    put(&count, 4);
    for (const Tensor<T>& t : net.tensors()) {
        int32_t dims[4] = {t.dims[0], t.dims[1], t.dims[2], t.dims[3]};
        put(dims, sizeof dims);
        for (T x : t.v) {
            double v = static_cast<double>(x);
            put(&v, 8);
        }
    }
    std::fclose(f);
}

template <typename T>
QNet<T> load_weights_t(const std::string& path, const NetConfig* expect) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open: " + path);
    auto get = [&](void* p, size_t n) {
        if (std::fread(p, 1, n, f) != n) {
            std::fclose(f);
            throw IoError("truncated weight file: " + path);
        }
    };
    char magic[4];
    get(magic, 4);
    if (std::memcmp(magic, kWeightMagic, 4) != 0) {
        std::fclose(f);
        throw IoError("not a weight file: " + path);
    }
    uint32_t version;
    get(&version, 4);
    if (version != kWeightVersion) {
        std::fclose(f);
        throw IoError("unsupported weight file version");
    }
    int32_t geo[8];
    get(geo, sizeof geo);
    NetConfig c{geo[0], geo[1], geo[2], geo[3], geo[4], geo[5], geo[6], geo[7]};
    if (expect && !(c == *expect)) {
        std::fclose(f);
        throw IoError("weight file geometry does not match: " + path);
    }
    try {
        shapes_for(c);
    } catch (const ConfigError&) {
        std::fclose(f);
        throw IoError("weight file carries an impossible geometry: " + path);
    }
    QNet<T> net(c, 0);
    uint32_t count;
    get(&count, 4);
    if (count != net.tensors().size()) {
        std::fclose(f);
        throw IoError("weight file tensor count mismatch: " + path);
    }
    size_t flat = 0;
    for (const Tensor<T>& t : net.tensors()) {
        int32_t dims[4];
        get(dims, sizeof dims);
        for (int i = 0; i < 4; ++i)
            if (dims[i] != t.dims[i]) {
                std::fclose(f);
                throw IoError("weight file tensor shape mismatch: " + path);
            }
        for (size_t i = 0; i < t.size(); ++i) {
            double v;
            get(&v, 8);
            net.set_param(flat++, static_cast<T>(v));
        }
    }
    std::fclose(f);
    return net;
}

}  // namespace

void save_weights(const QNet<float>& net, const std::string& path) { save_weights_t(net, path); }
void save_weights(const QNet<double>& net, const std::string& path) { save_weights_t(net, path); }

QNet<float> load_weights_f32(const std::string& path, const NetConfig* expect) {
    return load_weights_t<float>(path, expect);
}
QNet<double> load_weights_f64(const std::string& path, const NetConfig* expect) {
    return load_weights_t<double>(path, expect);
}

}  // namespace regrasp
