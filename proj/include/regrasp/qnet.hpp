#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "regrasp/errors.hpp"

namespace regrasp {

// Dense value buffer with fixed dims. Unused trailing dims stay 1.
template <typename T>
struct Tensor {
    std::array<int, 4> dims{1, 1, 1, 1};
    std::vector<T> v;

    Tensor() = default;
    explicit Tensor(std::array<int, 4> d)
        : dims(d), v(static_cast<size_t>(d[0]) * d[1] * d[2] * d[3], T(0)) {}
    size_t size() const { return v.size(); }
};

// Network geometry. Two identical towers (state, action) share this layout
// but not their weights; the trunk fuses tower outputs with place vectors.
struct NetConfig {
    int image_size = 60;
    int channels = 12;
    int place_dim = 5;
    int conv1_maps = 20;
    int conv2_maps = 50;
    int kernel = 5;
    int tower_fc = 100;
    int trunk_units = 60;

    static NetConfig paper() { return NetConfig{}; }
    // CPU-friendly profile with the same topology
    static NetConfig desk() { return NetConfig{24, 12, 5, 20, 50, 5, 50, 32}; }
    // tiny net for finite-difference checks
    static NetConfig gradcheck() { return NetConfig{12, 2, 5, 3, 4, 3, 8, 6}; }

    bool operator==(const NetConfig&) const = default;
};

struct SgdConfig {
    double learning_rate = 1e-3;
    double momentum = 0.9;
    int batch_size = 32;
    int iterations_per_round = 5000;
    uint64_t seed = 0;
};

// One regression example: flattened images (channels x size x size), place
// vectors, and the Sarsa-style target.
template <typename T>
struct QSample {
    std::vector<T> state_image;
    std::vector<T> state_place;
    std::vector<T> action_image;
    std::vector<T> action_place;
    T target = T(0);
};

namespace nn {

// Layer primitives, all valid-padding, stride 1 (conv) or 2 (pool). Shapes
// are caller-checked; these are the pieces the gradient tests pin down.

template <typename T>
void conv_forward(const T* in, int ic, int h, int w, const T* wt, const T* bias, int oc, int k,
                  T* out) {
    int oh = h - k + 1, ow = w - k + 1;
    for (int o = 0; o < oc; ++o)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                T acc = bias[o];
                for (int c = 0; c < ic; ++c) {
                    const T* ip = in + (static_cast<size_t>(c) * h + y) * w + x;
                    const T* wp = wt + ((static_cast<size_t>(o) * ic + c) * k) * k;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) acc += ip[ky * w + kx] * wp[ky * k + kx];
                }
                out[(static_cast<size_t>(o) * oh + y) * ow + x] = acc;
            }
}

template <typename T>
void conv_backward(const T* in, int ic, int h, int w, const T* wt, int oc, int k, const T* dout,
                   T* din, T* dwt, T* dbias) {
    int oh = h - k + 1, ow = w - k + 1;
    for (int o = 0; o < oc; ++o)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                T g = dout[(static_cast<size_t>(o) * oh + y) * ow + x];
                dbias[o] += g;
                for (int c = 0; c < ic; ++c) {
                    const T* ip = in + (static_cast<size_t>(c) * h + y) * w + x;
                    T* dip = din + (static_cast<size_t>(c) * h + y) * w + x;
                    const T* wp = wt + ((static_cast<size_t>(o) * ic + c) * k) * k;
                    T* dwp = dwt + ((static_cast<size_t>(o) * ic + c) * k) * k;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            dwp[ky * k + kx] += g * ip[ky * w + kx];
                            dip[ky * w + kx] += g * wp[ky * k + kx];
                        }
                }
            }
}

// 2x2 max pool, stride 2; odd trailing row/col is dropped. idx records the
// winning input offset per output cell for the backward pass.
template <typename T>
void pool2_forward(const T* in, int c, int h, int w, T* out, int* idx) {
    int oh = h / 2, ow = w / 2;
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                size_t base = (static_cast<size_t>(ch) * h + 2 * y) * w + 2 * x;
                size_t cand[4] = {base, base + 1, base + w, base + w + 1};
                size_t best = cand[0];
                for (int i = 1; i < 4; ++i)
                    if (in[cand[i]] > in[best]) best = cand[i];
                size_t o = (static_cast<size_t>(ch) * oh + y) * ow + x;
                out[o] = in[best];
                idx[o] = static_cast<int>(best);
            }
}

template <typename T>
void pool2_backward(const T* dout, int c, int h, int w, const int* idx, T* din) {
    int oh = h / 2, ow = w / 2;
    size_t n = static_cast<size_t>(c) * oh * ow;
    for (size_t o = 0; o < n; ++o) din[idx[o]] += dout[o];
}

template <typename T>
void relu_forward(const T* in, size_t n, T* out) {
    for (size_t i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <typename T>
void relu_backward(const T* in, const T* dout, size_t n, T* din) {
    for (size_t i = 0; i < n; ++i) din[i] += in[i] > T(0) ? dout[i] : T(0);
}

template <typename T>
void fc_forward(const T* in, int ni, const T* wt, const T* bias, int no, T* out) {
    for (int o = 0; o < no; ++o) {
        T acc = bias[o];
        const T* wp = wt + static_cast<size_t>(o) * ni;
        for (int i = 0; i < ni; ++i) acc += wp[i] * in[i];
        out[o] = acc;
    }
}

template <typename T>
void fc_backward(const T* in, int ni, const T* wt, int no, const T* dout, T* din, T* dwt,
                 T* dbias) {
    for (int o = 0; o < no; ++o) {
        T g = dout[o];
        dbias[o] += g;
        const T* wp = wt + static_cast<size_t>(o) * ni;
        T* dwp = dwt + static_cast<size_t>(o) * ni;
        for (int i = 0; i < ni; ++i) {
            dwp[i] += g * in[i];
            din[i] += g * wp[i];
        }
    }
}

template <typename T>
void sgd_update(T* w, T* v, const T* g, size_t n, T lr, T momentum) {
    for (size_t i = 0; i < n; ++i) {
        v[i] = momentum * v[i] - lr * g[i];
        w[i] += v[i];
    }
}

}  // namespace nn

// The Q function: scalar value of (state encoding, action encoding).
template <typename T>
class QNet {
  public:
    QNet(const NetConfig& config, uint64_t seed);

    const NetConfig& config() const { return config_; }

    // thread-safe for concurrent callers; activations are stack-local
    T forward(const QSample<T>& sample) const;

    // mean squared error over the batch; gradients replace previous ones
    double backward(const std::vector<QSample<T>>& batch);

    // v <- momentum v - lr g; w <- w + v, using the last backward() gradients
    void sgd_step(const SgdConfig& sgd);

    // flat parameter access, fixed enumeration order; used by the finite
    // difference tests and the weight file format
    size_t param_count() const;
    T param(size_t i) const;
    void set_param(size_t i, T value);
    T grad(size_t i) const;
    const std::vector<Tensor<T>>& tensors() const { return params_; }

  private:
    struct Stack;  // activation workspace
    T run(const QSample<T>& sample, Stack* stack) const;

    NetConfig config_;
    std::vector<Tensor<T>> params_;
    std::vector<Tensor<T>> grads_;
    std::vector<Tensor<T>> velocity_;
};

void save_weights(const QNet<float>& net, const std::string& path);
void save_weights(const QNet<double>& net, const std::string& path);

// expect, when given, pins the geometry the file must carry
QNet<float> load_weights_f32(const std::string& path, const NetConfig* expect = nullptr);
QNet<double> load_weights_f64(const std::string& path, const NetConfig* expect = nullptr);

}  // namespace regrasp
