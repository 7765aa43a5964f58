#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "cfcast/lstm.hpp"
#include "cfcast/stats.hpp"

using namespace cfcast;
using namespace cfcast::lstm;

namespace {

LstmNet zero_net(int hidden) {
    LstmNet net;
    net.hidden_size = hidden;
    net.input_size = 1;
    net.window = 3;
    const int cols = hidden + 1;
    net.w_f = net.w_i = net.w_c = net.w_o = Matrix(hidden, cols);
    net.b_f.assign(hidden, 0.0);
    net.b_i.assign(hidden, 0.0);
    net.b_c.assign(hidden, 0.0);
    net.b_o.assign(hidden, 0.0);
    net.head_w.assign(hidden, 0.0);
    net.head_b = 0.0;
    net.norm_min = 0.0;
    net.norm_max = 1.0;
    return net;
}

LstmNet random_net(int hidden, int window, std::uint64_t seed, double scale = 0.4) {
    LstmNet net = zero_net(hidden);
    net.window = window;
    Rng rng(seed);
    const auto fill = [&](std::vector<double>& v) {
        for (double& x : v) x = rng.uniform(-scale, scale);
    };
    fill(net.w_f.data);
    fill(net.w_i.data);
    fill(net.w_c.data);
    fill(net.w_o.data);
    fill(net.b_f);
    fill(net.b_i);
    fill(net.b_c);
    fill(net.b_o);
    fill(net.head_w);
    net.head_b = rng.uniform(-scale, scale);
    return net;
}

std::vector<Window> random_batch(size_t count, int window, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Window> batch(count);
    for (auto& w : batch) {
        w.inputs.resize(window);
        for (double& v : w.inputs) v = rng.uniform(0.0, 1.0);
        w.target = rng.uniform(0.0, 1.0);
    }
    return batch;
}

/// Pointers to every parameter / gradient slot in matching order.
std::vector<double*> param_slots(LstmNet& net) {
    std::vector<double*> out;
    const auto add = [&](std::vector<double>& v) {
        for (double& x : v) out.push_back(&x);
    };
    add(net.w_f.data);
    add(net.w_i.data);
    add(net.w_c.data);
    add(net.w_o.data);
    add(net.b_f);
    add(net.b_i);
    add(net.b_c);
    add(net.b_o);
    add(net.head_w);
    out.push_back(&net.head_b);
    return out;
}

std::vector<double*> grad_slots(Gradients& g) {
    std::vector<double*> out;
    const auto add = [&](std::vector<double>& v) {
        for (double& x : v) out.push_back(&x);
    };
    add(g.w_f.data);
    add(g.w_i.data);
    add(g.w_c.data);
    add(g.w_o.data);
    add(g.b_f);
    add(g.b_i);
    add(g.b_c);
    add(g.b_o);
    add(g.head_w);
    out.push_back(&g.head_b);
    return out;
}

TimeSeries sine_series(size_t n, double offset, double amplitude, double period,
                       Date start = Date(2017, 1, 1)) {
    std::vector<double> v(n);
    for (size_t t = 0; t < n; ++t) {
        v[t] = offset + amplitude * std::sin(2.0 * 3.14159265358979323846 *
                                             static_cast<double>(t) / period);
    }
    return TimeSeries(Variable::aqi, start, v);
}

} // namespace

TEST_CASE("cell_step saturation behaviour") {
    SECTION("all-zero parameters halve the carried memory") {
        LstmNet net = zero_net(1);
        CellState s0 = CellState::zero(1);
        const double x[1] = {0.9};
        const auto s1 = cell_step(net, s0, x);
        CHECK(s1.c[0] == Catch::Approx(0.0).margin(1e-15));
        CHECK(s1.h[0] == Catch::Approx(0.0).margin(1e-15));

        s0.c[0] = 2.0; // f = i = 0.5, ctilde = 0 -> c' = 1
        const auto s2 = cell_step(net, s0, x);
        CHECK(s2.c[0] == Catch::Approx(1.0));
        CHECK(s2.h[0] == Catch::Approx(0.5 * std::tanh(1.0)));
    }
    SECTION("a large forget bias keeps the whole value") {
        LstmNet net = zero_net(1);
        net.b_f[0] = 20.0;
        CellState s0 = CellState::zero(1);
        s0.c[0] = 3.0;
        const double x[1] = {0.3};
        const auto s1 = cell_step(net, s0, x);
        CHECK(s1.c[0] == Catch::Approx(3.0).margin(1e-6));
    }
}

TEST_CASE("memory is invariant with saturated forget and closed input gates") {
    LstmNet net = random_net(3, 4, 77, 0.08);
    std::fill(net.b_f.begin(), net.b_f.end(), 20.0);
    std::fill(net.b_i.begin(), net.b_i.end(), -20.0);
    CellState state = CellState::zero(3);
    state.c = {1.5, -0.75, 0.25};
    Rng rng(5);
    for (int step = 0; step < 10; ++step) {
        const double x[1] = {rng.uniform(0.0, 1.0)};
        const auto next = cell_step(net, state, x);
        for (int r = 0; r < 3; ++r) {
            CHECK(std::abs(next.c[r] - state.c[r]) < 1e-6);
        }
        state = next;
    }
}

TEST_CASE("make_windows framing") {
    const std::vector<double> y{1, 2, 3, 4};
    const auto w = make_windows(y, 2);
    REQUIRE(w.size() == 2);
    CHECK(w[0].inputs == std::vector<double>{1, 2});
    CHECK(w[0].target == 3);
    CHECK(w[1].inputs == std::vector<double>{2, 3});
    CHECK(w[1].target == 4);

    CHECK(make_windows(y, 3).size() == 1);
    CHECK_THROWS_AS(make_windows(y, 4), DataError);
    CHECK_THROWS_AS(make_windows(y, 9), DataError);
}

TEST_CASE("forward pass") {
    SECTION("zero net predicts the head bias") {
        LstmNet net = zero_net(4);
        net.head_b = 0.321;
        const std::vector<double> window{0.1, 0.9, 0.4};
        CHECK(forward(net, window).prediction == Catch::Approx(0.321));
    }
    SECTION("single-step single-unit cell matches scalar arithmetic") {
        LstmNet net = zero_net(1);
        net.w_f(0, 0) = 0.3;
        net.w_f(0, 1) = -0.2;
        net.b_f[0] = 0.1;
        net.w_i(0, 0) = -0.4;
        net.w_i(0, 1) = 0.25;
        net.b_i[0] = -0.05;
        net.w_c(0, 0) = 0.15;
        net.w_c(0, 1) = 0.5;
        net.b_c[0] = 0.2;
        net.w_o(0, 0) = 0.6;
        net.w_o(0, 1) = -0.1;
        net.b_o[0] = 0.05;
        net.head_w[0] = 1.2;
        net.head_b = -0.3;
        const double x = 0.7;
        const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
        const double f = sig(-0.2 * x + 0.1);
        const double i = sig(0.25 * x - 0.05);
        const double ct = std::tanh(0.5 * x + 0.2);
        const double o = sig(-0.1 * x + 0.05);
        const double c = f * 0.0 + i * ct;
        const double h = o * std::tanh(c);
        const double expect = 1.2 * h - 0.3;

        const std::vector<double> window{x};
        const auto trace = forward(net, window);
        CHECK(trace.prediction == Catch::Approx(expect).epsilon(1e-14));
        REQUIRE(trace.steps.size() == 1);
        CHECK(trace.steps[0].f[0] == Catch::Approx(f));
        CHECK(trace.steps[0].i[0] == Catch::Approx(i));
        CHECK(trace.steps[0].ctilde[0] == Catch::Approx(ct));
        CHECK(trace.steps[0].o[0] == Catch::Approx(o));
    }
    SECTION("trace has one entry per step with gates in range") {
        LstmNet net = random_net(5, 6, 31);
        const auto batch = random_batch(1, 6, 32);
        const auto trace = forward(net, batch[0].inputs);
        REQUIRE(trace.steps.size() == 6);
        for (const auto& st : trace.steps) {
            for (int r = 0; r < 5; ++r) {
                CHECK((st.f[r] > 0.0 && st.f[r] < 1.0));
                CHECK((st.i[r] > 0.0 && st.i[r] < 1.0));
                CHECK((st.o[r] > 0.0 && st.o[r] < 1.0));
                CHECK((st.ctilde[r] > -1.0 && st.ctilde[r] < 1.0));
                CHECK((st.h[r] >= -1.0 && st.h[r] <= 1.0));
            }
        }
    }
}

TEST_CASE("gradient matches central finite differences") {
    // The load-bearing check for the backward pass.
    const double fd_step = 1e-5;
    for (int net_id = 0; net_id < 5; ++net_id) {
        LstmNet net = random_net(2 + net_id % 2, 3 + net_id % 3, 100 + net_id);
        for (int batch_id = 0; batch_id < 3; ++batch_id) {
            const auto batch = random_batch(4, net.window, 200 + 10 * net_id + batch_id);
            Gradients g = gradient(net, batch);
            auto params = param_slots(net);
            auto grads = grad_slots(g);
            REQUIRE(params.size() == grads.size());
            double worst = 0.0;
            for (size_t k = 0; k < params.size(); ++k) {
                const double orig = *params[k];
                *params[k] = orig + fd_step;
                const double up = mse_loss(net, batch);
                *params[k] = orig - fd_step;
                const double down = mse_loss(net, batch);
                *params[k] = orig;
                const double fd = (up - down) / (2.0 * fd_step);
                const double rel =
                    std::abs(fd - *grads[k]) / std::max(1e-6, std::abs(fd) + std::abs(*grads[k]));
                worst = std::max(worst, rel);
            }
            CHECK(worst <= 1e-4);
        }
    }
}

TEST_CASE("gradient edge cases") {
    SECTION("zero net on zero targets has zero gradient") {
        LstmNet net = zero_net(3);
        std::vector<Window> batch(2);
        batch[0].inputs = {0.0, 0.0};
        batch[0].target = 0.0;
        batch[1].inputs = {0.0, 0.0};
        batch[1].target = 0.0;
        Gradients g = gradient(net, batch);
        CHECK(g.head_b == 0.0);
        CHECK(g.squared_norm() == 0.0);
    }
    SECTION("all-zero inputs leave the input-weight column untouched") {
        LstmNet net = random_net(3, 4, 9);
        std::vector<Window> batch(2);
        batch[0].inputs = {0.0, 0.0, 0.0, 0.0};
        batch[0].target = 0.7;
        batch[1].inputs = {0.0, 0.0, 0.0, 0.0};
        batch[1].target = 0.2;
        Gradients g = gradient(net, batch);
        for (int r = 0; r < 3; ++r) {
            CHECK(g.w_f(r, 3) == 0.0);
            CHECK(g.w_i(r, 3) == 0.0);
            CHECK(g.w_c(r, 3) == 0.0);
            CHECK(g.w_o(r, 3) == 0.0);
        }
    }
    SECTION("empty batch is rejected") {
        LstmNet net = zero_net(2);
        CHECK_THROWS_AS(gradient(net, {}), DataError);
    }
}

TEST_CASE("one small step on a fixed batch never increases its loss") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        LstmNet net = random_net(4, 5, 1000 + seed);
        const auto batch = random_batch(8, 5, 2000 + seed);
        const double before = mse_loss(net, batch);
        Gradients g = gradient(net, batch);
        const double lr = 1e-3;
        auto params = param_slots(net);
        Gradients gc = g;
        auto grads = grad_slots(gc);
        for (size_t k = 0; k < params.size(); ++k) *params[k] -= lr * *grads[k];
        const double after = mse_loss(net, batch);
        CHECK(after <= before + 1e-12);
    }
}

TEST_CASE("train contract") {
    SECTION("zero epochs returns the seed-initialized net") {
        const auto series = sine_series(60, 10.0, 3.0, 20.0);
        TrainConfig cfg;
        cfg.hidden_size = 4;
        cfg.window = 5;
        cfg.epochs = 0;
        cfg.seed = 11;
        const auto res = train(series, cfg);
        CHECK(res.loss_curve.empty());
        CHECK(to_text(res.net) == to_text(init_net(cfg, 7.0, 13.0)));
    }
    SECTION("constant series cannot be normalized") {
        const TimeSeries series(Variable::aqi, Date(2017, 1, 1), std::vector<double>(50, 4.0));
        TrainConfig cfg;
        cfg.window = 5;
        CHECK_THROWS_AS(train(series, cfg), DataError);
    }
    SECTION("too-short series is a length error") {
        const auto series = sine_series(20, 10.0, 3.0, 20.0);
        TrainConfig cfg;
        cfg.window = 14;
        CHECK_THROWS_AS(train(series, cfg), DataError);
    }
    SECTION("an absurd learning rate raises a divergence error naming the epoch") {
        const auto series = sine_series(80, 10.0, 3.0, 20.0);
        TrainConfig cfg;
        cfg.hidden_size = 4;
        cfg.window = 5;
        cfg.epochs = 5;
        cfg.learning_rate = 1e200;
        cfg.clip_norm = 5.0;
        CHECK_THROWS_WITH(train(series, cfg), Catch::Matchers::ContainsSubstring("epoch"));
    }
    SECTION("training reduces the loss on a smooth series") {
        const auto series = sine_series(240, 10.0, 4.0, 30.0);
        TrainConfig cfg;
        cfg.hidden_size = 12;
        cfg.window = 8;
        cfg.epochs = 120;
        cfg.seed = 3;
        const auto res = train(series, cfg);
        REQUIRE(res.loss_curve.size() == 120);
        CHECK(res.loss_curve.back() < res.loss_curve.front());
        CHECK(res.loss_curve.back() < 0.01);
    }
    SECTION("identical seed and data give a bit-identical loss curve") {
        const auto series = sine_series(120, 10.0, 4.0, 30.0);
        TrainConfig cfg;
        cfg.hidden_size = 6;
        cfg.window = 6;
        cfg.epochs = 8;
        cfg.seed = 42;
        const auto a = train(series, cfg);
        const auto b = train(series, cfg);
        REQUIRE(a.loss_curve.size() == b.loss_curve.size());
        for (size_t i = 0; i < a.loss_curve.size(); ++i) {
            CHECK(a.loss_curve[i] == b.loss_curve[i]);
        }
        CHECK(to_text(a.net) == to_text(b.net));
    }
}

TEST_CASE("recursive forecasting") {
    SECTION("constant net forecasts a constant, floored at zero") {
        LstmNet net = zero_net(2);
        net.window = 3;
        net.norm_min = 0.0;
        net.norm_max = 10.0;
        net.head_b = 0.25;
        const std::vector<double> tail{1.0, 2.0, 3.0};
        const auto fc = forecast_recursive(net, tail, 4);
        REQUIRE(fc.size() == 4);
        for (double v : fc) CHECK(v == Catch::Approx(2.5));

        net.head_b = -0.5; // denormalizes to -5, clamped
        const auto fc2 = forecast_recursive(net, tail, 2);
        for (double v : fc2) CHECK(v == 0.0);
    }
    SECTION("horizon one equals a single denormalized forward call") {
        LstmNet net = random_net(3, 4, 8);
        net.norm_min = 2.0;
        net.norm_max = 12.0;
        const std::vector<double> tail{3.0, 5.0, 7.0, 9.0};
        std::vector<double> norm(tail);
        for (double& v : norm) v = net.normalize(v);
        const double direct = net.denormalize(forward(net, norm).prediction);
        const auto fc = forecast_recursive(net, tail, 1);
        CHECK(fc[0] == Catch::Approx(std::max(0.0, direct)));
    }
    SECTION("tail shorter than the window is rejected") {
        LstmNet net = zero_net(2);
        net.window = 5;
        const std::vector<double> tail{1.0, 2.0};
        CHECK_THROWS_AS(forecast_recursive(net, tail, 3), DataError);
    }
}

TEST_CASE("parameter file round trip") {
    const auto series = sine_series(80, 10.0, 3.0, 25.0);
    TrainConfig cfg;
    cfg.hidden_size = 5;
    cfg.window = 6;
    cfg.epochs = 3;
    cfg.seed = 77;
    const auto res = train(series, cfg);

    const auto dir = std::filesystem::temp_directory_path() / "cfcast_test_lstm";
    std::filesystem::create_directories(dir);
    const auto path = dir / "net.txt";
    save(res.net, path);
    const LstmNet back = load(path);
    CHECK(to_text(back) == to_text(res.net));

    const std::vector<double> tail(series.values().end() - 6, series.values().end());
    CHECK(forecast_recursive(back, tail, 5) == forecast_recursive(res.net, tail, 5));

    CHECK_THROWS_AS(from_text("bogus 3"), DataError);
}
