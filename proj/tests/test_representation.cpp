#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "amad/forward.hpp"
#include "amad/model.hpp"
#include "amad/representation.hpp"
#include "gradcheck.hpp"

using namespace amad;
using Catch::Approx;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.embed_dim = 2;
    cfg.hidden = 4;
    cfg.seed = 5;
    return cfg;
}

Model tiny_model(const TrainConfig& cfg, int dimension = 6) {
    return Model::init(dimension, cfg, RngStream(cfg.seed).fork("init"));
}

/// Scalar-by-hand attention recomputation, independent of the tape ops.
std::vector<double> manual_attention(const std::vector<std::vector<double>>& score_rows,
                                     const std::vector<std::vector<double>>& value_rows,
                                     const Tensor& w, const Tensor& b, const Tensor& u) {
    const std::size_t k = score_rows.size();
    const std::size_t att = w.cols();
    std::vector<double> scores(k);
    for (std::size_t i = 0; i < k; ++i) {
        double e = 0.0;
        for (std::size_t j = 0; j < att; ++j) {
            double pre = b.values[j];
            for (std::size_t p = 0; p < score_rows[i].size(); ++p)
                pre += score_rows[i][p] * w.at(p, j);
            e += std::tanh(pre) * u.values[j];
        }
        scores[i] = e;
    }
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    double z = 0.0;
    std::vector<double> a(k);
    for (std::size_t i = 0; i < k; ++i) {
        a[i] = std::exp(scores[i] - mx);
        z += a[i];
    }
    for (double& v : a) v /= z;
    std::vector<double> out(value_rows[0].size(), 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += a[i] * value_rows[i][j];
    return out;
}

}  // namespace

TEST_CASE("attribute attention: single feature returns its embedding") {
    auto cfg = tiny_config();
    Model m = tiny_model(cfg);
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    Var v = attend_attribute(tape, bm, {3}, m.embed_dim);
    const auto& emb = m.value(ParamId::embedding);
    CHECK(tape.value(v)[0] == Approx(emb.at(3, 0)));
    CHECK(tape.value(v)[1] == Approx(emb.at(3, 1)));

    Var rep = attend_attribute(tape, bm, {3, 3, 3, 3}, m.embed_dim);
    CHECK(tape.value(rep)[0] == Approx(emb.at(3, 0)));
    CHECK(tape.value(rep)[1] == Approx(emb.at(3, 1)));
}

TEST_CASE("attribute attention: empty attribute is the zero vector") {
    auto cfg = tiny_config();
    Model m = tiny_model(cfg);
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    Var v = attend_attribute(tape, bm, {}, m.embed_dim);
    CHECK(tape.value(v) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("attribute attention matches a scalar-by-hand recomputation") {
    auto cfg = tiny_config();
    Model m = tiny_model(cfg);
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    const std::vector<int> ids = {0, 2, 5};
    Var v = attend_attribute(tape, bm, ids, m.embed_dim);

    const auto& emb = m.value(ParamId::embedding);
    std::vector<std::vector<double>> rows;
    for (int id : ids) rows.push_back({emb.at(id, 0), emb.at(id, 1)});
    auto expect = manual_attention(rows, rows, m.value(ParamId::att_f_w),
                                   m.value(ParamId::att_f_b), m.value(ParamId::att_f_u));
    for (std::size_t j = 0; j < expect.size(); ++j)
        CHECK(tape.value(v)[j] == Approx(expect[j]).margin(1e-10));
}

TEST_CASE("attention weights are a distribution (identity-value probe)") {
    auto cfg = tiny_config();
    Model m = tiny_model(cfg);
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    // with the identity as values, the pooled row *is* the weight vector
    Var scores_in = tape.leaf(Tensor::matrix(3, 2, {0.3, -1.2, 0.8, 0.1, -0.4, 2.0}));
    Var eye = tape.leaf(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
    Var w = attention_pool(scores_in, eye, bm[ParamId::att_f_w], bm[ParamId::att_f_b],
                           bm[ParamId::att_f_u]);
    double total = 0.0;
    for (double x : tape.value(w)) {
        CHECK(x >= 0.0);
        total += x;
    }
    CHECK(total == Approx(1.0).margin(1e-9));
}

TEST_CASE("permuting features within an attribute leaves its vector unchanged") {
    auto cfg = tiny_config();
    Model m = tiny_model(cfg);
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    Var a = attend_attribute(tape, bm, {1, 4, 2}, m.embed_dim);
    Var b = attend_attribute(tape, bm, {2, 1, 4}, m.embed_dim);
    for (std::size_t j = 0; j < tape.value(a).size(); ++j)
        CHECK(tape.value(a)[j] == Approx(tape.value(b)[j]).margin(1e-12));
}

TEST_CASE("self attention: one attribute, identical attributes, hand oracle") {
    auto cfg = tiny_config();
    Model m = tiny_model(cfg);
    Tape tape;
    BoundModel bm = bind(tape, m, false);

    Var single = tape.leaf(Tensor::row_vector({0.7, -0.3}));
    std::vector<Var> one = {single};
    Var vs1 = attend_instance_self(bm, one);
    CHECK(tape.value(vs1) == std::vector<double>{0.7, -0.3});

    std::vector<Var> same = {single, single, single};
    Var vs2 = attend_instance_self(bm, same);
    CHECK(tape.value(vs2)[0] == Approx(0.7));
    CHECK(tape.value(vs2)[1] == Approx(-0.3));

    std::vector<std::vector<double>> rows = {{0.7, -0.3}, {0.1, 0.9}, {-1.0, 0.2}};
    std::vector<Var> three;
    for (const auto& r : rows) three.push_back(tape.leaf(Tensor::row_vector(r)));
    Var vs3 = attend_instance_self(bm, three);
    auto expect = manual_attention(rows, rows, m.value(ParamId::att_a_w),
                                   m.value(ParamId::att_a_b), m.value(ParamId::att_a_u));
    for (std::size_t j = 0; j < expect.size(); ++j)
        CHECK(tape.value(vs3)[j] == Approx(expect[j]).margin(1e-10));
}

TEST_CASE("relative attention: zero memory, symmetry, hand oracle") {
    auto cfg = tiny_config();
    Model m = tiny_model(cfg);
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    Var zero_mem = tape.leaf(Tensor::zeros({1, 4}));
    Var some_mem = tape.leaf(Tensor::row_vector({0.4, -0.1, 0.9, 0.3}));

    Var a0 = tape.leaf(Tensor::row_vector({0.7, -0.3}));
    std::vector<Var> same = {a0, a0};
    Var r1 = attend_instance_relative(bm, same, zero_mem, cfg.leaky_slope);
    Var r2 = attend_instance_relative(bm, same, some_mem, cfg.leaky_slope);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(tape.value(r1)[j] == Approx(tape.value(a0)[j]));
        CHECK(tape.value(r2)[j] == Approx(tape.value(a0)[j]));
    }

    std::vector<std::vector<double>> rows = {{0.7, -0.3}, {-0.5, 1.1}, {0.05, 0.4}};
    std::vector<Var> attrs;
    for (const auto& r : rows) attrs.push_back(tape.leaf(Tensor::row_vector(r)));
    Var vr = attend_instance_relative(bm, attrs, some_mem, cfg.leaky_slope);

    const auto mem = tape.value(some_mem);
    std::vector<std::vector<double>> score_rows;
    for (const auto& r : rows) {
        std::vector<double> sr;
        for (double x : r) sr.push_back(x >= 0 ? x : cfg.leaky_slope * x);
        sr.insert(sr.end(), mem.begin(), mem.end());
        score_rows.push_back(sr);
    }
    auto expect = manual_attention(score_rows, rows, m.value(ParamId::att_r_w),
                                   m.value(ParamId::att_r_b), m.value(ParamId::att_r_u));
    for (std::size_t j = 0; j < expect.size(); ++j)
        CHECK(tape.value(vr)[j] == Approx(expect[j]).margin(1e-10));
}

TEST_CASE("instance vectors: degenerate and mirrored batches") {
    Tape tape;
    std::vector<Var> one = {tape.leaf(Tensor::row_vector({2.0, -1.0, 0.5, 3.0}))};
    auto vs = assemble_instance_vectors(one, 1e-5);
    REQUIRE(vs.size() == 1);
    for (double x : tape.value(vs[0])) CHECK(x == 0.0);

    std::vector<Var> mirrored = {tape.leaf(Tensor::row_vector({1.0, -2.0})),
                                 tape.leaf(Tensor::row_vector({-1.0, 2.0}))};
    auto vm = assemble_instance_vectors(mirrored, 1e-12);
    CHECK(tape.value(vm[0])[0] == Approx(1.0).margin(1e-5));
    CHECK(tape.value(vm[0])[1] == Approx(-1.0).margin(1e-5));
    CHECK(tape.value(vm[1])[0] == Approx(-1.0).margin(1e-5));
    CHECK(tape.value(vm[1])[1] == Approx(1.0).margin(1e-5));
}

TEST_CASE("rnn chain: single step, zero fixed point, hand recomputation") {
    auto cfg = tiny_config();
    Model m = tiny_model(cfg);
    Tape tape;
    BoundModel bm = bind(tape, m, false);

    Var h0 = tape.leaf(Tensor::zeros({1, 4}));
    Var x0 = tape.leaf(Tensor::zeros({1, 4}));
    // rnn_b is zero-initialized, so zero input and state stay at zero
    std::vector<Var> zin = {x0, x0, x0};
    auto zstates = rnn_chain(zin, h0, bm[ParamId::rnn_w_in], bm[ParamId::rnn_w_rec],
                             bm[ParamId::rnn_b]);
    REQUIRE(zstates.size() == 3);
    for (double v : tape.value(zstates.back())) CHECK(v == 0.0);

    // three-step hand recomputation with the initialized weights
    std::vector<std::vector<double>> xs = {{0.2, -0.4, 0.9, 0.1},
                                           {-0.7, 0.3, 0.0, 0.5},
                                           {1.0, -1.0, 0.25, -0.3}};
    std::vector<Var> xv;
    for (const auto& x : xs) xv.push_back(tape.leaf(Tensor::row_vector(x)));
    auto states = rnn_chain(xv, h0, bm[ParamId::rnn_w_in], bm[ParamId::rnn_w_rec],
                            bm[ParamId::rnn_b]);
    REQUIRE(states.size() == 3);

    const auto& w_in = m.value(ParamId::rnn_w_in);
    const auto& w_rec = m.value(ParamId::rnn_w_rec);
    const auto& b = m.value(ParamId::rnn_b);
    std::vector<double> h(4, 0.0);
    for (const auto& x : xs) {
        std::vector<double> nh(4);
        for (int j = 0; j < 4; ++j) {
            double acc = b.values[j];
            for (int p = 0; p < 4; ++p) acc += x[p] * w_in.at(p, j) + h[p] * w_rec.at(p, j);
            nh[j] = std::tanh(acc);
        }
        h = nh;
    }
    for (int j = 0; j < 4; ++j)
        CHECK(tape.value(states.back())[j] == Approx(h[j]).margin(1e-12));

    // single step from a non-zero previous state
    std::vector<Var> one_in = {xv[0]};
    auto s1 = rnn_chain(one_in, states.back(), bm[ParamId::rnn_w_in], bm[ParamId::rnn_w_rec],
                        bm[ParamId::rnn_b]);
    REQUIRE(s1.size() == 1);
}

TEST_CASE("shape contract through a full block forward") {
    auto cfg = tiny_config();
    Model m = tiny_model(cfg, 8);
    Block block;
    for (int i = 0; i < 3; ++i) {
        Instance inst;
        inst.attributes = {{i}, {i + 1, i + 2}, {}};
        inst.timestamp_index = i;
        block.instances.push_back(inst);
    }
    Tensor mem = Tensor::zeros({1, 4});
    Tape tape;
    BoundModel bm = bind(tape, m, false);
    auto fwd = forward_block(tape, bm, m, block, mem, cfg);
    REQUIRE(fwd.inst_real.size() == 3);
    CHECK(tape.shape(fwd.inst_real[0]) == std::vector<std::size_t>{1, 4});  // 2*embed_dim
    CHECK(tape.shape(fwd.block_real) == std::vector<std::size_t>{1, 4});    // hidden
    CHECK(tape.shape(fwd.inst_fake[0]) == std::vector<std::size_t>{1, 4});
    CHECK(tape.shape(fwd.yhat_inst_real[0]) == std::vector<std::size_t>{1, 1});

    TrainConfig ablated = cfg;
    ablated.no_relrep = true;
    Model m2 = Model::init(8, ablated, RngStream(5).fork("init"));
    Tape tape2;
    BoundModel bm2 = bind(tape2, m2, false);
    auto fwd2 = forward_block(tape2, bm2, m2, block, mem, ablated);
    CHECK(tape2.shape(fwd2.inst_real[0]) == std::vector<std::size_t>{1, 2});  // embed_dim
    CHECK(tape2.shape(fwd2.block_real) == std::vector<std::size_t>{1, 4});
}

TEST_CASE("gradients flow through attention into the embedding table") {
    auto cfg = tiny_config();
    Model m = tiny_model(cfg, 6);
    Block block;
    {
        Instance a, b;
        a.attributes = {{0, 1}, {2}, {3}};
        b.attributes = {{4}, {5, 0}, {1}};
        block.instances = {a, b};
    }
    Tensor mem = Tensor::zeros({1, 4});
    mem.values = {0.1, -0.2, 0.3, 0.05};

    BlockForwardOptions opts;
    opts.real_only = true;
    auto loss_value = [&] {
        Tape tape;
        BoundModel bm = bind(tape, m, true);
        auto fwd = forward_block(tape, bm, m, block, mem, cfg, opts);
        Var loss = sum(fwd.block_real);
        for (Var v : fwd.inst_real) loss = add(loss, sum(tanh(v)));
        return tape.scalar_value(loss);
    };

    Tape tape;
    BoundModel bm = bind(tape, m, true);
    auto fwd = forward_block(tape, bm, m, block, mem, cfg, opts);
    Var loss = sum(fwd.block_real);
    for (Var v : fwd.inst_real) loss = add(loss, sum(tanh(v)));
    tape.backward(loss);

    for (ParamId id : {ParamId::embedding, ParamId::att_f_w, ParamId::att_a_u, ParamId::att_r_w,
                       ParamId::rnn_w_rec}) {
        INFO(param_name(id));
        auto bad = gradcheck::check_param(m.value(id), tape.grad(bm[id]), loss_value,
                                          param_name(id));
        CHECK(bad.empty());
    }
}
