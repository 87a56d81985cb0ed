#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "amad/adversarial.hpp"
#include "amad/forward.hpp"
#include "amad/model.hpp"

using namespace amad;
using Catch::Approx;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.embed_dim = 2;
    cfg.hidden = 4;
    cfg.seed = 9;
    return cfg;
}

}  // namespace

TEST_CASE("autoencoder with zero weights and no noise outputs zero") {
    auto cfg = tiny_config();
    Model m = Model::init(6, cfg, RngStream(1).fork("init"));
    for (ParamId id : {ParamId::ae_w_enc, ParamId::ae_w_dec})
        for (double& v : m.value(id).values) v = 0.0;
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    Var x = tape.leaf(Tensor::row_vector({0.5, -1.0, 2.0, 0.1}));
    Var out = autoencode(bm, x, std::nullopt, cfg.leaky_slope);
    for (double v : tape.value(out)) CHECK(v == 0.0);
}

TEST_CASE("autoencoder matches a hand recomputation without noise") {
    auto cfg = tiny_config();
    Model m = Model::init(6, cfg, RngStream(2).fork("init"));
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    const std::vector<double> xin = {0.6, -0.9, 0.2, 1.4};
    Var out = autoencode(bm, tape.leaf(Tensor::row_vector(xin)), std::nullopt, cfg.leaky_slope);

    auto leaky = [&](double v) { return v >= 0 ? v : cfg.leaky_slope * v; };
    const auto& we = m.value(ParamId::ae_w_enc);
    const auto& be = m.value(ParamId::ae_b_enc);
    const auto& wd = m.value(ParamId::ae_w_dec);
    const auto& bd = m.value(ParamId::ae_b_dec);
    const int d = 4, dh = 2;
    std::vector<double> h(dh);
    for (int j = 0; j < dh; ++j) {
        double acc = be.values[j];
        for (int p = 0; p < d; ++p) acc += leaky(xin[p]) * we.at(p, j);
        h[j] = acc;
    }
    for (int j = 0; j < d; ++j) {
        double acc = bd.values[j];
        for (int p = 0; p < dh; ++p) acc += leaky(h[p]) * wd.at(p, j);
        CHECK(tape.value(out)[j] == Approx(leaky(acc)).margin(1e-12));
    }
}

TEST_CASE("same seed gives the same noise and the same resembled vector") {
    auto cfg = tiny_config();
    Model m = Model::init(6, cfg, RngStream(3).fork("init"));
    auto run = [&] {
        RngStream noise = RngStream(42).fork("noise");
        Tape tape;
        BoundModel bm = bind(tape, m, false);
        Var x = tape.leaf(Tensor::row_vector({0.6, -0.9, 0.2, 1.4}));
        Var delta = tape.leaf(gaussian_sample({1, 4}, noise), false);
        return tape.value(autoencode(bm, x, delta, cfg.leaky_slope));
    };
    CHECK(run() == run());
}

TEST_CASE("identity transform with perfect weights cancels the noise exactly") {
    TrainConfig cfg = tiny_config();
    cfg.encoder_hidden = 4;  // square autoencoder so the identity is representable
    Model m = Model::init(6, cfg, RngStream(4).fork("init"));
    auto& we = m.value(ParamId::ae_w_enc);
    auto& wd = m.value(ParamId::ae_w_dec);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            we.at(i, j) = i == j ? 1.0 : 0.0;
            wd.at(i, j) = i == j ? 1.0 : 0.0;
        }
    for (double& v : m.value(ParamId::ae_b_enc).values) v = 0.0;
    for (double& v : m.value(ParamId::ae_b_dec).values) v = 0.0;

    RngStream noise(11);
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    const std::vector<double> xin = {0.6, -0.9, 0.2, 1.4};
    Var x = tape.leaf(Tensor::row_vector(xin));
    for (int k = 0; k < 5; ++k) {
        Var delta = tape.leaf(gaussian_sample({1, 4}, noise), false);
        Var out = autoencode(bm, x, delta, cfg.leaky_slope, Activation::identity);
        for (int j = 0; j < 4; ++j) CHECK(tape.value(out)[j] == Approx(xin[j]).margin(1e-12));
    }
}

TEST_CASE("noise draws have finite spread around the deterministic center") {
    auto cfg = tiny_config();
    Model m = Model::init(6, cfg, RngStream(5).fork("init"));
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    Var x = tape.leaf(Tensor::row_vector({0.6, -0.9, 0.2, 1.4}));
    const auto center = tape.value(autoencode(bm, x, std::nullopt, cfg.leaky_slope));
    RngStream noise(17);
    double spread = 0.0;
    for (int k = 0; k < 32; ++k) {
        Var delta = tape.leaf(gaussian_sample({1, 4}, noise), false);
        const auto out = tape.value(autoencode(bm, x, delta, cfg.leaky_slope));
        for (int j = 0; j < 4; ++j) {
            CHECK(std::isfinite(out[j]));
            spread += (out[j] - center[j]) * (out[j] - center[j]);
        }
    }
    CHECK(std::isfinite(spread));
    // the center is reproduced exactly with no noise
    const auto again = tape.value(autoencode(bm, x, std::nullopt, cfg.leaky_slope));
    CHECK(again == center);
}

TEST_CASE("frozen-copy chain reproduces the representation chain bit-exactly") {
    auto cfg = tiny_config();
    Model m = Model::init(6, cfg, RngStream(6).fork("init"));
    Tape tape;
    BoundModel bm = bind(tape, m, true);
    std::vector<Var> inputs = {tape.leaf(Tensor::row_vector({0.2, -0.4, 0.9, 0.1})),
                               tape.leaf(Tensor::row_vector({-0.7, 0.3, 0.0, 0.5}))};
    Var h0 = tape.leaf(Tensor::row_vector({0.05, 0.1, -0.2, 0.0}));
    auto real = rnn_chain(inputs, h0, bm[ParamId::rnn_w_in], bm[ParamId::rnn_w_rec],
                          bm[ParamId::rnn_b]);
    auto fake = generate_block_chain(bm, inputs, h0);
    REQUIRE(real.size() == fake.size());
    for (std::size_t i = 0; i < real.size(); ++i)
        CHECK(tape.value(real[i]) == tape.value(fake[i]));
}

TEST_CASE("block generator: zero inputs, zero state, zero bias stay at zero") {
    auto cfg = tiny_config();
    Model m = Model::init(6, cfg, RngStream(7).fork("init"));
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    Var z = tape.leaf(Tensor::zeros({1, 4}));
    std::vector<Var> inputs = {z, z};
    auto states = generate_block_chain(bm, inputs, z);
    for (double v : tape.value(states.back())) CHECK(v == 0.0);
}

TEST_CASE("a loss on the resembled block vector leaves the RNN weights untouched") {
    auto cfg = tiny_config();
    Model m = Model::init(8, cfg, RngStream(8).fork("init"));
    Block block;
    for (int i = 0; i < 3; ++i) {
        Instance inst;
        inst.attributes = {{i}, {i + 1}, {i + 2}};
        block.instances.push_back(inst);
    }
    Tensor mem = Tensor::zeros({1, 4});
    Tape tape;
    BoundModel bm = bind(tape, m, true);
    auto fwd = forward_block(tape, bm, m, block, mem, cfg);
    tape.backward(sum(fwd.block_fake));

    for (ParamId id : {ParamId::rnn_w_in, ParamId::rnn_w_rec, ParamId::rnn_b}) {
        INFO(param_name(id));
        for (double g : tape.grad(bm[id]).values) CHECK(g == 0.0);
    }
    // while the autoencoder upstream of it does receive gradient
    double total = 0.0;
    for (double g : tape.grad(bm[ParamId::ae_w_enc]).values) total += std::fabs(g);
    CHECK(total > 0.0);
}

TEST_CASE("discriminators: neutral weights, saturation, hand oracle") {
    auto cfg = tiny_config();
    Model m = Model::init(6, cfg, RngStream(9).fork("init"));
    for (double& v : m.value(ParamId::disc_i_w).values) v = 0.0;
    m.value(ParamId::disc_i_b).values[0] = 0.0;
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    Var x = tape.leaf(Tensor::row_vector({3.0, -2.0, 0.5, 1.0}));
    CHECK(tape.scalar_value(discriminate_instance(bm, x)) == Approx(0.5));

    // a huge bias saturates the sigmoid toward (but never onto) 1
    m.value(ParamId::disc_i_b).values[0] = 50.0;
    Tape tape2;
    BoundModel bm2 = bind(tape2, m, false);
    Var x2 = tape2.leaf(Tensor::row_vector({3.0, -2.0, 0.5, 1.0}));
    const double yhat = tape2.scalar_value(discriminate_instance(bm2, x2));
    CHECK(yhat > 0.999999);
    CHECK(yhat < 1.0 + 1e-15);

    // hand dot product through the block head
    Tape tape3;
    BoundModel bm3 = bind(tape3, m, false);
    const std::vector<double> hin = {0.2, -0.4, 0.9, 0.1};
    Var hb = tape3.leaf(Tensor::row_vector(hin));
    double acc = m.value(ParamId::disc_b_b).values[0];
    for (int p = 0; p < 4; ++p) acc += hin[p] * m.value(ParamId::disc_b_w).values[p];
    CHECK(tape3.scalar_value(discriminate_block(bm3, hb)) ==
          Approx(1.0 / (1.0 + std::exp(-acc))).margin(1e-12));
}
