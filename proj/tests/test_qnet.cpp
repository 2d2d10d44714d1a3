#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "regrasp/errors.hpp"
#include "regrasp/qnet.hpp"
#include "regrasp/rng.hpp"

using namespace regrasp;

namespace {

// relative error with a floor so exactly-zero pairs compare clean
double rel_err(double a, double b) {
    double m = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / m;
}

std::vector<double> random_vec(Rng& rng, size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

QSample<double> random_sample(Rng& rng, const NetConfig& c) {
    QSample<double> s;
    size_t img = static_cast<size_t>(c.channels) * c.image_size * c.image_size;
    s.state_image = random_vec(rng, img, 0.0, 1.0);
    s.action_image = random_vec(rng, img, 0.0, 1.0);
    s.state_place = random_vec(rng, static_cast<size_t>(c.place_dim), 0.0, 1.0);
    s.action_place = random_vec(rng, static_cast<size_t>(c.place_dim), 0.0, 1.0);
    s.target = rng.uniform(-1.0, 1.0);
    return s;
}

}  // namespace

TEST_CASE("convolution gradients match central differences") {
    Rng rng(41);
    const int ic = 2, h = 7, w = 6, oc = 3, k = 3;
    const int oh = h - k + 1, ow = w - k + 1;
    auto in = random_vec(rng, static_cast<size_t>(ic) * h * w);
    auto wt = random_vec(rng, static_cast<size_t>(oc) * ic * k * k);
    auto bias = random_vec(rng, oc);
    auto proj = random_vec(rng, static_cast<size_t>(oc) * oh * ow);

    // scalar loss: projection of the output onto a fixed random direction
    auto loss = [&](const std::vector<double>& i, const std::vector<double>& wts,
                    const std::vector<double>& b) {
        std::vector<double> out(proj.size());
        nn::conv_forward(i.data(), ic, h, w, wts.data(), b.data(), oc, k, out.data());
        double s = 0.0;
        for (size_t j = 0; j < out.size(); ++j) s += out[j] * proj[j];
        return s;
    };

    std::vector<double> din(in.size(), 0.0), dwt(wt.size(), 0.0), dbias(bias.size(), 0.0);
    nn::conv_backward(in.data(), ic, h, w, wt.data(), oc, k, proj.data(), din.data(), dwt.data(),
                      dbias.data());

    const double eps = 1e-6;
    auto fd = [&](std::vector<double>& v, size_t j, auto&& f) {
        double keep = v[j];
        v[j] = keep + eps;
        double hi = f();
        v[j] = keep - eps;
        double lo = f();
        v[j] = keep;
        return (hi - lo) / (2 * eps);
    };
    for (size_t j = 0; j < in.size(); ++j)
        CHECK(rel_err(din[j], fd(in, j, [&] { return loss(in, wt, bias); })) < 1e-4);
    for (size_t j = 0; j < wt.size(); ++j)
        CHECK(rel_err(dwt[j], fd(wt, j, [&] { return loss(in, wt, bias); })) < 1e-4);
    for (size_t j = 0; j < bias.size(); ++j)
        CHECK(rel_err(dbias[j], fd(bias, j, [&] { return loss(in, wt, bias); })) < 1e-4);
}

TEST_CASE("pooling and relu route gradients to the right inputs") {
    Rng rng(42);
    const int c = 3, h = 6, w = 5;  // odd width exercises the dropped column
    auto in = random_vec(rng, static_cast<size_t>(c) * h * w);
    const int oh = h / 2, ow = w / 2;
    std::vector<double> out(static_cast<size_t>(c) * oh * ow);
    std::vector<int> idx(out.size());
    auto proj = random_vec(rng, out.size());

    auto pool_loss = [&](const std::vector<double>& i) {
        std::vector<double> o(out.size());
        std::vector<int> ix(out.size());
        nn::pool2_forward(i.data(), c, h, w, o.data(), ix.data());
        double s = 0.0;
        for (size_t j = 0; j < o.size(); ++j) s += o[j] * proj[j];
        return s;
    };
    nn::pool2_forward(in.data(), c, h, w, out.data(), idx.data());
    std::vector<double> din(in.size(), 0.0);
    nn::pool2_backward(proj.data(), c, h, w, idx.data(), din.data());
    const double eps = 1e-6;
    for (size_t j = 0; j < in.size(); ++j) {
        double keep = in[j];
        in[j] = keep + eps;
        double hi = pool_loss(in);
        in[j] = keep - eps;
        double lo = pool_loss(in);
        in[j] = keep;
        CHECK(rel_err(din[j], (hi - lo) / (2 * eps)) < 1e-4);
    }

    // relu: values away from the kink differentiate cleanly
    auto rin = random_vec(rng, 64);
    for (double& x : rin)
        if (std::abs(x) < 0.05) x += 0.1;  // keep clear of zero
    auto rproj = random_vec(rng, 64);
    std::vector<double> rout(64), drin(64, 0.0);
    nn::relu_forward(rin.data(), 64, rout.data());
    nn::relu_backward(rin.data(), rproj.data(), 64, drin.data());
    for (size_t j = 0; j < 64; ++j) {
        double expect = rin[j] > 0.0 ? rproj[j] : 0.0;
        CHECK(drin[j] == expect);
        CHECK(rout[j] == (rin[j] > 0.0 ? rin[j] : 0.0));
    }
}

TEST_CASE("fully connected gradients match central differences") {
    Rng rng(43);
    const int ni = 9, no = 4;
    auto in = random_vec(rng, ni);
    auto wt = random_vec(rng, static_cast<size_t>(no) * ni);
    auto bias = random_vec(rng, no);
    auto proj = random_vec(rng, no);

    auto loss = [&] {
        std::vector<double> out(no);
        nn::fc_forward(in.data(), ni, wt.data(), bias.data(), no, out.data());
        double s = 0.0;
        for (int j = 0; j < no; ++j) s += out[j] * proj[j];
        return s;
    };
    std::vector<double> din(ni, 0.0), dwt(wt.size(), 0.0), dbias(no, 0.0);
    nn::fc_backward(in.data(), ni, wt.data(), no, proj.data(), din.data(), dwt.data(),
                    dbias.data());
    const double eps = 1e-6;
    auto fd = [&](std::vector<double>& v, size_t j) {
        double keep = v[j];
        v[j] = keep + eps;
        double hi = loss();
        v[j] = keep - eps;
        double lo = loss();
        v[j] = keep;
        return (hi - lo) / (2 * eps);
    };
    for (int j = 0; j < ni; ++j) CHECK(rel_err(din[j], fd(in, j)) < 1e-4);
    for (size_t j = 0; j < wt.size(); ++j) CHECK(rel_err(dwt[j], fd(wt, j)) < 1e-4);
    for (int j = 0; j < no; ++j) CHECK(rel_err(dbias[j], fd(bias, j)) < 1e-4);
}

TEST_CASE("every network parameter passes the finite difference check") {
    NetConfig cfg = NetConfig::gradcheck();
    QNet<double> net(cfg, 7);
    Rng rng(44);
    std::vector<QSample<double>> batch;
    for (int i = 0; i < 3; ++i) batch.push_back(random_sample(rng, cfg));

    double base_loss = net.backward(batch);
    CHECK(base_loss > 0.0);

    auto batch_loss = [&] {
        double s = 0.0;
        for (const auto& item : batch) {
            double q = net.forward(item);
            double e = q - item.target;
            s += e * e / batch.size();
        }
        return s;
    };

    const double eps = 1e-5;
    size_t n = net.param_count();
    REQUIRE(n > 500);
    int worst_idx = -1;
    double worst = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double keep = net.param(i);
        net.set_param(i, keep + eps);
        double hi = batch_loss();
        net.set_param(i, keep - eps);
        double lo = batch_loss();
        net.set_param(i, keep);
        double fd = (hi - lo) / (2 * eps);
        double err = rel_err(net.grad(i), fd);
        if (err > worst) {
            worst = err;
            worst_idx = static_cast<int>(i);
        }
    }
    INFO("worst parameter ", worst_idx, " rel err ", worst);
    CHECK(worst < 1e-4);
}

TEST_CASE("forward is deterministic and zero on zero inputs") {
    NetConfig cfg = NetConfig::gradcheck();
    QNet<double> net(cfg, 3);

    QSample<double> zero;
    size_t img = static_cast<size_t>(cfg.channels) * cfg.image_size * cfg.image_size;
    zero.state_image.assign(img, 0.0);
    zero.action_image.assign(img, 0.0);
    zero.state_place.assign(static_cast<size_t>(cfg.place_dim), 0.0);
    zero.action_place.assign(static_cast<size_t>(cfg.place_dim), 0.0);
    CHECK(net.forward(zero) == 0.0);  // all biases start at zero

    Rng rng(45);
    QSample<double> s = random_sample(rng, cfg);
    double a = net.forward(s);
    double b = net.forward(s);
    CHECK(a == b);

    QSample<double> bad = s;
    bad.state_image.pop_back();
    CHECK_THROWS_AS(net.forward(bad), ContractViolation);
    CHECK_THROWS_AS(net.backward({}), ContractViolation);
    QSample<double> inf = s;
    inf.target = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(net.backward({inf}), ContractViolation);
}

TEST_CASE("a batch already on target produces zero loss and zero gradients") {
    NetConfig cfg = NetConfig::gradcheck();
    QNet<double> net(cfg, 8);
    Rng rng(46);
    std::vector<QSample<double>> batch;
    for (int i = 0; i < 4; ++i) {
        QSample<double> s = random_sample(rng, cfg);
        s.target = net.forward(s);
        batch.push_back(s);
    }
    double loss = net.backward(batch);
    CHECK(loss == 0.0);
    for (size_t i = 0; i < net.param_count(); ++i) CHECK(net.grad(i) == 0.0);

    // and sgd on zero gradients moves nothing
    std::vector<double> before(net.param_count());
    for (size_t i = 0; i < before.size(); ++i) before[i] = net.param(i);
    net.sgd_step(SgdConfig{});
    for (size_t i = 0; i < before.size(); ++i) CHECK(net.param(i) == before[i]);
}

TEST_CASE("output bias gradient is twice the residual") {
    NetConfig cfg = NetConfig::gradcheck();
    QNet<double> net(cfg, 9);
    Rng rng(47);
    QSample<double> s = random_sample(rng, cfg);
    double q = net.forward(s);
    s.target = q - 0.37;
    net.backward({s});
    double expect = 2.0 * (q - s.target);
    CHECK(rel_err(net.grad(net.param_count() - 1), expect) < 1e-12);
}

TEST_CASE("momentum update follows the closed-form quadratic descent") {
    // f(w) = (w - 3)^2 / 2, gradient w - 3, no momentum: w_k - 3 decays as
    // (1 - lr)^k
    double w = 10.0, v = 0.0;
    const double lr = 0.1;
    for (int k = 1; k <= 12; ++k) {
        double g = w - 3.0;
        nn::sgd_update(&w, &v, &g, 1, lr, 0.0);
        double expect = 3.0 + std::pow(1.0 - lr, k) * 7.0;
        CHECK(rel_err(w, expect) < 1e-12);
    }

    // with a constant gradient, two plain steps equal one summed step
    double w1 = 2.0, v1 = 0.0, g = 0.4;
    nn::sgd_update(&w1, &v1, &g, 1, lr, 0.0);
    nn::sgd_update(&w1, &v1, &g, 1, lr, 0.0);
    double w2 = 2.0, v2 = 0.0, g2 = 2.0 * g;
    nn::sgd_update(&w2, &v2, &g2, 1, lr, 0.0);
    CHECK(w1 == w2);

    // momentum 0, lr 1, gradient equal to the weight zeroes it
    double w3 = 1.7, v3 = 0.0, g3 = 1.7;
    nn::sgd_update(&w3, &v3, &g3, 1, 1.0, 0.0);
    CHECK(w3 == 0.0);
}

TEST_CASE("descent on a frozen batch is near-monotone") {
    NetConfig cfg = NetConfig::gradcheck();
    QNet<double> net(cfg, 10);
    Rng rng(48);
    std::vector<QSample<double>> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(random_sample(rng, cfg));

    SgdConfig sgd;
    sgd.batch_size = 8;
    double first = net.backward(batch);
    double prev = first;
    int bumps = 0;
    double last = first;
    for (int k = 0; k < 100; ++k) {
        net.sgd_step(sgd);
        last = net.backward(batch);
        if (last >= prev) ++bumps;
        prev = last;
    }
    CHECK(bumps <= 5);
    CHECK(last < first);
}

TEST_CASE("the network can memorize a fixed batch") {
    NetConfig cfg = NetConfig::gradcheck();
    QNet<double> net(cfg, 11);
    Rng rng(49);
    std::vector<QSample<double>> batch;
    for (int i = 0; i < 32; ++i) {
        QSample<double> s = random_sample(rng, cfg);
        s.target = rng.uniform(0.0, 1.0);
        batch.push_back(s);
    }
    SgdConfig sgd;
    double loss = 1.0;
    for (int k = 0; k < 5000 && loss >= 1e-3; ++k) {
        loss = net.backward(batch);
        net.sgd_step(sgd);
    }
    CHECK(loss < 1e-3);
}

TEST_CASE("weights survive a save/load round trip") {
    NetConfig cfg = NetConfig::gradcheck();
    QNet<double> net(cfg, 12);
    // push the weights off their init so the file carries trained state
    Rng rng(50);
    std::vector<QSample<double>> batch = {random_sample(rng, cfg)};
    net.backward(batch);
    net.sgd_step(SgdConfig{});

    const std::string path = "qnet_roundtrip.rgw";
    save_weights(net, path);
    QNet<double> back = load_weights_f64(path, &cfg);
    REQUIRE(back.param_count() == net.param_count());
    for (size_t i = 0; i < net.param_count(); ++i) CHECK(back.param(i) == net.param(i));
    for (int i = 0; i < 100; ++i) {
        QSample<double> s = random_sample(rng, cfg);
        CHECK(net.forward(s) == back.forward(s));
    }

    // truncation must be caught
    FILE* f = std::fopen(path.c_str(), "rb+");
    REQUIRE(f);
    std::fclose(f);
    std::FILE* t = std::fopen("qnet_truncated.rgw", "wb");
    REQUIRE(t);
    std::vector<char> head(100);
    FILE* src = std::fopen(path.c_str(), "rb");
    REQUIRE(std::fread(head.data(), 1, head.size(), src) == head.size());
    std::fclose(src);
    REQUIRE(std::fwrite(head.data(), 1, head.size(), t) == head.size());
    std::fclose(t);
    CHECK_THROWS_AS(load_weights_f64("qnet_truncated.rgw"), IoError);

    // geometry pinning
    NetConfig other = NetConfig::desk();
    CHECK_THROWS_AS(load_weights_f64(path, &other), IoError);
    std::remove(path.c_str());
    std::remove("qnet_truncated.rgw");
}

TEST_CASE("float nets run the same machinery") {
    NetConfig cfg = NetConfig::gradcheck();
    QNet<float> net(cfg, 13);
    Rng rng(51);
    QSample<float> s;
    size_t img = static_cast<size_t>(cfg.channels) * cfg.image_size * cfg.image_size;
    auto fill = [&](std::vector<float>& v, size_t n) {
        v.resize(n);
        for (float& x : v) x = static_cast<float>(rng.uniform(0.0, 1.0));
    };
    fill(s.state_image, img);
    fill(s.action_image, img);
    fill(s.state_place, static_cast<size_t>(cfg.place_dim));
    fill(s.action_place, static_cast<size_t>(cfg.place_dim));
    s.target = 0.5f;

    float q0 = net.forward(s);
    CHECK(std::isfinite(q0));
    SgdConfig sgd;
    sgd.learning_rate = 1e-2;
    double loss = 0.0;
    for (int k = 0; k < 200; ++k) {
        loss = net.backward({s});
        net.sgd_step(sgd);
    }
    CHECK(loss < 1e-4);  // single sample is easy to fit

    const std::string path = "qnet_f32.rgw";
    save_weights(net, path);
    QNet<float> back = load_weights_f32(path, &cfg);
    CHECK(back.forward(s) == net.forward(s));
    std::remove(path.c_str());
}
