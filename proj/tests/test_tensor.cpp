#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "xvfi/tensor.hpp"

using xvfi::ConvSpec;
using xvfi::Tensor;

namespace {

void check_close(const Tensor& got, const Tensor& want, double tol) {
    REQUIRE(got.same_shape(want));
    double worst = 0.0;
    for (size_t i = 0; i < got.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(got.data()[i]) - want.data()[i]));
    }
    CHECK(worst <= tol);
}

}  // namespace

TEST_CASE("tensor basics") {
    Tensor t(2, 3, 4, 1.5f);
    CHECK(t.size() == 24);
    CHECK(t.at(1, 2, 3) == 1.5f);
    t.at(0, 1, 2) = -2.0f;
    CHECK(t.row(0, 1)[2] == -2.0f);
    CHECK_THROWS_AS(Tensor(0, 3, 3), xvfi::ShapeError);
    CHECK_THROWS_AS(Tensor::from_data(1, 2, 2, {1.0f}), xvfi::ShapeError);
}

TEST_CASE("conv2d zero kernel gives zeros") {
    Tensor in = oracle::random_tensor(3, 8, 8, 1);
    ConvSpec spec{3, 4, 3};
    std::vector<float> w(spec.weight_count(), 0.0f), b(4, 0.0f);
    Tensor out = xvfi::conv2d(in, w, b, spec);
    for (float v : out.data()) CHECK(v == 0.0f);
}

TEST_CASE("conv2d identity kernel reproduces input exactly") {
    Tensor in = oracle::random_tensor(2, 7, 9, 2);
    ConvSpec spec{2, 2, 3};
    std::vector<float> w(spec.weight_count(), 0.0f), b(2, 0.0f);
    // center tap of matching in/out channel = 1
    for (int c = 0; c < 2; ++c) w[((static_cast<size_t>(c) * 2 + c) * 3 + 1) * 3 + 1] = 1.0f;
    Tensor out = xvfi::conv2d(in, w, b, spec);
    REQUIRE(out.same_shape(in));
    for (size_t i = 0; i < in.size(); ++i) CHECK(out.data()[i] == in.data()[i]);
}

TEST_CASE("conv2d 4x4 stride 2 all-ones on ones image") {
    // 4x4 input, zero padding 1: every 4x4 window covers exactly 3x3 real
    // ones, so all four outputs are 9.
    Tensor in(1, 4, 4, 1.0f);
    ConvSpec spec{1, 1, 4};
    std::vector<float> w(16, 1.0f), b(1, 0.0f);
    Tensor out = xvfi::conv2d(in, w, b, spec);
    REQUIRE(out.height() == 2);
    REQUIRE(out.width() == 2);
    for (float v : out.data()) CHECK(v == 9.0f);
}

TEST_CASE("conv2d matches naive oracle") {
    struct Case {
        int cin, cout, k, h, w;
    };
    for (Case cs : {Case{3, 5, 3, 9, 11}, Case{4, 2, 4, 10, 12}, Case{6, 3, 1, 7, 7}, Case{1, 1, 4, 4, 6}}) {
        ConvSpec spec{cs.cin, cs.cout, cs.k};
        auto w = oracle::random_vec(spec.weight_count(), 77 + cs.k);
        auto b = oracle::random_vec(cs.cout, 99 + cs.k);
        Tensor in = oracle::random_tensor(cs.cin, cs.h, cs.w, 55 + cs.k);
        Tensor got = xvfi::conv2d(in, w, b, spec);
        Tensor want = oracle::conv2d_naive(in, w, b, cs.cout, cs.k, spec.stride(), spec.padding());
        check_close(got, want, 1e-5);
    }
}

TEST_CASE("conv2d is linear in the input") {
    ConvSpec spec{2, 3, 3};
    auto w = oracle::random_vec(spec.weight_count(), 11);
    std::vector<float> b(3, 0.0f);  // bias off so superposition is exact
    Tensor a = oracle::random_tensor(2, 6, 6, 12);
    Tensor c = oracle::random_tensor(2, 6, 6, 13);
    Tensor sum(2, 6, 6);
    for (size_t i = 0; i < sum.size(); ++i) sum.data()[i] = a.data()[i] + c.data()[i];
    Tensor fa = xvfi::conv2d(a, w, b, spec);
    Tensor fc = xvfi::conv2d(c, w, b, spec);
    Tensor fsum = xvfi::conv2d(sum, w, b, spec);
    for (size_t i = 0; i < fsum.size(); ++i) {
        CHECK(std::abs(fsum.data()[i] - (fa.data()[i] + fc.data()[i])) <= 1e-5);
    }
}

TEST_CASE("conv2d virtual concat equals conv of materialized concat") {
    Tensor a = oracle::random_tensor(2, 6, 8, 21);
    Tensor b2 = oracle::random_tensor(3, 6, 8, 22);
    ConvSpec spec{5, 4, 3};
    auto w = oracle::random_vec(spec.weight_count(), 23);
    auto b = oracle::random_vec(4, 24);
    Tensor cat = xvfi::concat({&a, &b2});
    Tensor want = xvfi::conv2d(cat, w, b, spec);
    xvfi::detail::ConvIn ins[2] = {{&a, false, 0}, {&b2, false, 0}};
    Tensor got = xvfi::detail::conv2d_multi(std::span<const xvfi::detail::ConvIn>(ins, 2), w, b, spec);
    for (size_t i = 0; i < want.size(); ++i) CHECK(got.data()[i] == want.data()[i]);
}

TEST_CASE("conv2d up2 view equals conv of materialized upscale") {
    Tensor a = oracle::random_tensor(3, 5, 7, 31);
    Tensor up = xvfi::nn_upscale2(a);
    for (int k : {3, 4}) {
        ConvSpec spec{3, 2, k};
        auto w = oracle::random_vec(spec.weight_count(), 32 + k);
        auto b = oracle::random_vec(2, 33 + k);
        if (k == 4 && (up.height() % 2 || up.width() % 2)) continue;
        Tensor want = xvfi::conv2d(up, w, b, spec);
        xvfi::detail::ConvIn ins[1] = {{&a, true, 0}};
        Tensor got = xvfi::detail::conv2d_multi(std::span<const xvfi::detail::ConvIn>(ins, 1), w, b, spec);
        for (size_t i = 0; i < want.size(); ++i) CHECK(got.data()[i] == want.data()[i]);
    }
}

TEST_CASE("conv2d row strips match whole-tensor evaluation") {
    // Evaluate output rows in two strips where the second strip's input
    // tensor only stores the rows it needs; must be bitwise identical.
    Tensor in = oracle::random_tensor(2, 12, 10, 41);
    ConvSpec spec{2, 3, 4};
    auto w = oracle::random_vec(spec.weight_count(), 42);
    auto b = oracle::random_vec(3, 43);
    Tensor want = xvfi::conv2d(in, w, b, spec);

    Tensor got(3, want.height(), want.width());
    const int split = 3;  // output rows [0, 3) and [3, 6)
    {
        xvfi::detail::ConvIn ins[1] = {{&in, false, 0}};
        xvfi::detail::conv2d_core(std::span<const xvfi::detail::ConvIn>(ins, 1), 12, 10, w, b, spec, got, 0, split);
    }
    {
        // rows needed for oy in [3, 6): iy in [2*3-1, 2*5+2] = [5, 12)
        const int first = 5;
        Tensor strip(2, 12 - first, 10);
        for (int c = 0; c < 2; ++c)
            for (int y = first; y < 12; ++y)
                std::copy_n(in.row(c, y), 10, strip.row(c, y - first));
        xvfi::detail::ConvIn ins[1] = {{&strip, false, first}};
        xvfi::detail::conv2d_core(std::span<const xvfi::detail::ConvIn>(ins, 1), 12, 10, w, b, spec, got, split,
                                  want.height());
    }
    for (size_t i = 0; i < want.size(); ++i) CHECK(got.data()[i] == want.data()[i]);
}

TEST_CASE("conv2d shape errors carry both shapes") {
    Tensor in(3, 4, 4);
    ConvSpec spec{5, 2, 3};
    std::vector<float> w(spec.weight_count(), 0.0f), b(2, 0.0f);
    try {
        xvfi::conv2d(in, w, b, spec);
        FAIL("expected ShapeError");
    } catch (const xvfi::ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("3") != std::string::npos);
        CHECK(msg.find("5") != std::string::npos);
    }
    ConvSpec s2{5, 2, 4};  // stride 2 rejects odd dims
    std::vector<float> w2(s2.weight_count(), 0.0f);
    CHECK_THROWS_AS(xvfi::conv2d(Tensor(5, 5, 5), w2, b, s2), xvfi::ShapeError);
}

TEST_CASE("relu") {
    Tensor t = Tensor::from_data(1, 1, 4, {-1.0f, 0.0f, 2.5f, -0.0f});
    Tensor out = xvfi::relu(t);
    CHECK(out.data()[0] == 0.0f);
    CHECK(out.data()[1] == 0.0f);
    CHECK(out.data()[2] == 2.5f);
    CHECK(out.data()[3] == 0.0f);
    Tensor r = oracle::random_tensor(3, 9, 9, 7);
    Tensor ro = xvfi::relu(r);
    for (size_t i = 0; i < r.size(); ++i) CHECK(ro.data()[i] == std::max(0.0f, r.data()[i]));
}

TEST_CASE("resblock zero weights is identity") {
    Tensor in = oracle::random_tensor(4, 6, 6, 8);
    ConvSpec spec{4, 4, 3};
    std::vector<float> zw(spec.weight_count(), 0.0f), zb(4, 0.0f);
    Tensor out = xvfi::resblock(in, zw, zb, zw, zb, spec);
    for (size_t i = 0; i < in.size(); ++i) CHECK(out.data()[i] == in.data()[i]);
}

TEST_CASE("resblock matches composed ops") {
    Tensor in = oracle::random_tensor(3, 7, 7, 9);
    ConvSpec spec{3, 3, 3};
    auto w1 = oracle::random_vec(spec.weight_count(), 10);
    auto b1 = oracle::random_vec(3, 11);
    auto w2 = oracle::random_vec(spec.weight_count(), 12);
    auto b2 = oracle::random_vec(3, 13);
    Tensor got = xvfi::resblock(in, w1, b1, w2, b2, spec);
    Tensor h = oracle::conv2d_naive(in, w1, b1, 3, 3, 1, 1);
    for (auto& v : h.data()) v = std::max(0.0f, v);
    Tensor want = oracle::conv2d_naive(h, w2, b2, 3, 3, 1, 1);
    for (size_t i = 0; i < want.size(); ++i) want.data()[i] += in.data()[i];
    check_close(got, want, 1e-5);
}

TEST_CASE("nn_upscale2 index map and avgpool round trip") {
    Tensor in = Tensor::from_data(1, 2, 2, {1, 2, 3, 4});
    Tensor up = xvfi::nn_upscale2(in);
    REQUIRE(up.height() == 4);
    std::vector<float> want = {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    for (size_t i = 0; i < want.size(); ++i) CHECK(up.data()[i] == want[i]);

    Tensor r = oracle::random_tensor(3, 5, 6, 14);
    Tensor rup = xvfi::nn_upscale2(r);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < rup.height(); ++y)
            for (int x = 0; x < rup.width(); ++x) CHECK(rup.at(c, y, x) == r.at(c, y / 2, x / 2));
    Tensor back = oracle::avgpool2(rup);
    for (size_t i = 0; i < r.size(); ++i) CHECK(back.data()[i] == r.data()[i]);
}

TEST_CASE("pixel_shuffle ramp lays out row-major") {
    std::vector<float> v(16);
    std::iota(v.begin(), v.end(), 0.0f);
    Tensor in = Tensor::from_data(16, 1, 1, std::move(v));
    Tensor out = xvfi::pixel_shuffle4(in);
    REQUIRE(out.channels() == 1);
    REQUIRE(out.height() == 4);
    REQUIRE(out.width() == 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(out.at(0, y, x) == static_cast<float>(y * 4 + x));
}

TEST_CASE("pixel_shuffle preserves constants and multisets") {
    Tensor c(32, 3, 3, 0.25f);
    Tensor out = xvfi::pixel_shuffle4(c);
    REQUIRE(out.channels() == 2);
    REQUIRE(out.height() == 12);
    for (float x : out.data()) CHECK(x == 0.25f);

    Tensor r = oracle::random_tensor(16, 4, 5, 15);
    Tensor ro = xvfi::pixel_shuffle(r, 4);
    auto a = std::vector<float>(r.data().begin(), r.data().end());
    auto b = std::vector<float>(ro.data().begin(), ro.data().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);

    CHECK_THROWS_AS(xvfi::pixel_shuffle(Tensor(15, 2, 2), 4), xvfi::ShapeError);
    // factor 2 path used when M = 2
    Tensor r2 = oracle::random_tensor(8, 3, 3, 16);
    Tensor out2 = xvfi::pixel_shuffle(r2, 2);
    CHECK(out2.channels() == 2);
    CHECK(out2.at(0, 1, 0) == r2.at(2, 0, 0));  // dy=1,dx=0 -> channel 2
}

TEST_CASE("bicubic_downscale constants and identity") {
    Tensor c(3, 8, 8, 0.3f);
    Tensor down = xvfi::bicubic_downscale(c, 2);
    REQUIRE(down.height() == 4);
    for (float v : down.data()) CHECK(std::abs(v - 0.3f) <= 1e-6);

    Tensor r = oracle::random_tensor(2, 6, 6, 17, 0.0f, 1.0f);
    Tensor same = xvfi::bicubic_downscale(r, 1);
    for (size_t i = 0; i < r.size(); ++i) CHECK(same.data()[i] == r.data()[i]);

    CHECK_THROWS_AS(xvfi::bicubic_downscale(Tensor(1, 6, 7), 2), xvfi::ShapeError);
}

TEST_CASE("bicubic_downscale of a linear ramp stays on the ramp") {
    // Catmull-Rom reproduces linear functions exactly away from clamped
    // borders; interior samples must match the analytic ramp value.
    const int n = 16;
    Tensor ramp(1, n, n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) ramp.at(0, y, x) = static_cast<float>(x) / (2 * n);
    Tensor down = xvfi::bicubic_downscale(ramp, 2);
    for (int y = 0; y < n / 2; ++y) {
        for (int x = 1; x < n / 2 - 1; ++x) {
            const double src = (x + 0.5) * 2 - 0.5;
            CHECK(std::abs(down.at(0, y, x) - src / (2 * n)) <= 1e-4);
        }
    }
    for (float v : down.data()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
}

TEST_CASE("bilinear_resize identity, constant and oracle") {
    Tensor r = oracle::random_tensor(2, 5, 4, 18);
    Tensor same = xvfi::bilinear_resize(r, 1);
    for (size_t i = 0; i < r.size(); ++i) CHECK(same.data()[i] == r.data()[i]);

    Tensor c(1, 3, 3, 0.7f);
    Tensor up = xvfi::bilinear_resize(c, 4);
    REQUIRE(up.height() == 12);
    for (float v : up.data()) CHECK(std::abs(v - 0.7f) <= 1e-7);

    Tensor in = Tensor::from_data(1, 2, 2, {0, 1, 2, 3});
    Tensor got = xvfi::bilinear_resize(in, 2);
    Tensor want = oracle::bilinear_naive(in, 2);
    check_close(got, want, 1e-6);

    Tensor big = oracle::random_tensor(3, 7, 9, 19);
    check_close(xvfi::bilinear_resize(big, 4), oracle::bilinear_naive(big, 4), 1e-5);
}

TEST_CASE("concat stacks channels in order") {
    Tensor a(1, 2, 2, 1.0f), b(2, 2, 2, 2.0f);
    Tensor cat = xvfi::concat({&a, &b});
    REQUIRE(cat.channels() == 3);
    CHECK(cat.at(0, 0, 0) == 1.0f);
    CHECK(cat.at(1, 1, 1) == 2.0f);
    CHECK(cat.at(2, 0, 1) == 2.0f);
    Tensor bad(1, 3, 2);
    const Tensor* parts[2] = {&a, &bad};
    CHECK_THROWS_AS(xvfi::concat(std::span<const Tensor* const>(parts, 2)), xvfi::ShapeError);
}

TEST_CASE("take_channels and elementwise helpers") {
    Tensor r = oracle::random_tensor(4, 3, 3, 20);
    Tensor sl = xvfi::take_channels(r, 1, 2);
    REQUIRE(sl.channels() == 2);
    CHECK(sl.at(0, 2, 2) == r.at(1, 2, 2));
    CHECK(sl.at(1, 0, 0) == r.at(2, 0, 0));
    CHECK_THROWS_AS(xvfi::take_channels(r, 3, 2), xvfi::ShapeError);

    Tensor s = Tensor::from_data(1, 1, 3, {-100.0f, 0.0f, 100.0f});
    xvfi::sigmoid_inplace(s);
    CHECK(s.data()[0] == Catch::Approx(0.0).margin(1e-7));
    CHECK(s.data()[1] == 0.5f);
    CHECK(s.data()[2] == Catch::Approx(1.0).margin(1e-7));

    Tensor cl = Tensor::from_data(1, 1, 3, {-0.5f, 0.5f, 1.5f});
    xvfi::clamp01_inplace(cl);
    CHECK(cl.data()[0] == 0.0f);
    CHECK(cl.data()[1] == 0.5f);
    CHECK(cl.data()[2] == 1.0f);
}

TEST_CASE("kernels are invariant to the thread cap") {
    Tensor in = oracle::random_tensor(4, 34, 38, 60);
    ConvSpec spec{4, 6, 4};
    auto w = oracle::random_vec(spec.weight_count(), 61);
    auto b = oracle::random_vec(6, 62);
    xvfi::set_thread_cap(1);
    Tensor one = xvfi::conv2d(in, w, b, spec);
    Tensor bi1 = xvfi::bilinear_resize(in, 3);
    xvfi::set_thread_cap(8);
    Tensor eight = xvfi::conv2d(in, w, b, spec);
    Tensor bi8 = xvfi::bilinear_resize(in, 3);
    xvfi::set_thread_cap(0);
    for (size_t i = 0; i < one.size(); ++i) REQUIRE(one.data()[i] == eight.data()[i]);
    for (size_t i = 0; i < bi1.size(); ++i) REQUIRE(bi1.data()[i] == bi8.data()[i]);
}
