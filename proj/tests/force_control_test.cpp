#include <cmath>

#include <gtest/gtest.h>

#include "decake/force_control.hpp"
#include "decake/random.hpp"

using namespace decake;

namespace {

EndEffectorState ee_at(double z, double speed = 20.0, double dt = 0.004) {
    EndEffectorState e;
    e.pose = Pose(0, 0, z, 0);
    e.speed_limit = speed;
    e.control_period = dt;
    return e;
}

std::vector<TimedPoint> straight_path(double duration, double speed = 40.0) {
    std::vector<TimedPoint> p;
    for (int k = 0; k <= 100; ++k) {
        const double t = duration * k / 100.0;
        p.push_back({t, speed * t, 0.0});
    }
    return p;
}

}  // namespace

TEST(CompliantDescend, StopsAtSpringDeflection) {
    // Quasi-static: tiny steps so the overshoot vanishes.
    const auto r = compliant_descend(ee_at(110, 1.0, 0.001), 0, 5.0, ContactModel::flat(100, 10.0));
    EXPECT_TRUE(r.contacted);
    EXPECT_NEAR(r.stop_z, 99.5, 0.002);
}

TEST(CompliantDescend, NoSurfaceAboveTarget) {
    const auto r = compliant_descend(ee_at(110), 50, 5.0, ContactModel::flat(20, 10.0));
    EXPECT_FALSE(r.contacted);
    EXPECT_DOUBLE_EQ(r.stop_z, 50.0);
}

TEST(CompliantDescend, ZeroThresholdStopsAtFirstContact) {
    const double step = 20.0 * 0.004;
    const auto r = compliant_descend(ee_at(110), 0, 0.0, ContactModel::flat(100, 10.0));
    EXPECT_TRUE(r.contacted);
    EXPECT_NEAR(r.stop_z, 100.0, step);
    EXPECT_LE(r.stop_z, 100.0);
}

TEST(CompliantDescend, Preconditions) {
    EXPECT_THROW(compliant_descend(ee_at(10), 20, 5.0, ContactModel::flat(0)), PreconditionViolation);
    EXPECT_THROW(compliant_descend(ee_at(110), 0, -1.0, ContactModel::flat(0)), PreconditionViolation);
    ContactModel hole = ContactModel::flat(0);
    hole.surface = [](double, double) { return std::optional<double>(); };
    EXPECT_THROW(compliant_descend(ee_at(110), 0, 5.0, hole), ContactFault);
}

TEST(CompliantDescend, OvershootBoundSweep) {
    Rng rng(17);
    for (int trial = 0; trial < 500; ++trial) {
        const double k = rng.uniform(1.0, 50.0);
        const double c = rng.uniform(0.0, 0.5);
        const double v = rng.uniform(1.0, 100.0);
        const double dt = rng.uniform(0.001, 0.01);
        const double f_stop = rng.uniform(0.0, 20.0);
        const double surface = rng.uniform(0.0, 100.0);
        const auto r = compliant_descend(ee_at(surface + rng.uniform(1.0, 50.0), v, dt), surface - 50.0, f_stop,
                                         ContactModel::flat(surface, k, c));
        ASSERT_TRUE(r.contacted);
        const double fz = r.trace.back().fz;
        EXPECT_GE(fz, f_stop);
        EXPECT_LE(fz - f_stop, k * v * dt + c * v + 1e-9) << "trial " << trial;
        for (const auto& reading : r.trace) EXPECT_GE(reading.fz, 0.0);
    }
}

TEST(HybridTrack, ErrorHalvesEachStep) {
    // g*dt = 0.5, surface at 0, k = 10: start 0.1 mm deep -> 1 N, error 4 N.
    HybridParams hp;
    hp.gain_dt = 0.5;
    hp.control_period = 0.004;
    const auto r = hybrid_track(straight_path(0.1), -0.1, 5.0, 0.1, ContactModel::flat(0.0, 10.0), hp);
    const double expected[] = {4.0, 2.0, 1.0, 0.5, 0.25};
    for (int n = 0; n < 5; ++n) EXPECT_NEAR(5.0 - r.trace[static_cast<std::size_t>(n)].ft.fz, expected[n], 1e-9);
    EXPECT_EQ(r.settle_steps, settle_steps_for(4.0, 0.1, 0.5));
    EXPECT_DOUBLE_EQ(r.in_band_fraction, 1.0);
}

TEST(HybridTrack, SurfaceStepReentryCount) {
    // 1 mm step up halfway along the path.
    const double k = 10.0;
    const double gdt = 0.3;
    const double band = 1.0;
    ContactModel step_surface;
    step_surface.stiffness = k;
    step_surface.surface = [](double x, double) { return std::optional<double>(x < 20.0 ? 0.0 : 1.0); };
    HybridParams hp;
    hp.gain_dt = gdt;
    const auto r = hybrid_track(straight_path(1.0), -0.5, 5.0, band, step_surface, hp);
    std::size_t jump = 0;
    for (std::size_t n = 1; n < r.trace.size(); ++n)
        if (r.trace[n].pose.x >= 20.0 && r.trace[n - 1].pose.x < 20.0) jump = n;
    ASSERT_GT(jump, 0u);
    const double transient = std::abs(r.trace[jump].ft.fz - 5.0);
    EXPECT_LE(transient, k * 1.0 + 1e-6);
    const auto bound = static_cast<std::size_t>(std::ceil(std::log(band / (k * 1.0)) / std::log(std::abs(1.0 - gdt))));
    std::size_t reentry = jump;
    while (std::abs(r.trace[reentry].ft.fz - 5.0) > band) ++reentry;
    EXPECT_LE(reentry - jump, bound);
    for (std::size_t n = reentry; n < r.trace.size(); ++n) EXPECT_LE(std::abs(r.trace[n].ft.fz - 5.0), band + 1e-9);
}

TEST(HybridTrack, ConvergesForAnyGainSweep) {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        HybridParams hp;
        hp.gain_dt = rng.uniform(0.01, 0.99);
        hp.control_period = rng.uniform(0.001, 0.01);
        const double k = rng.uniform(1.0, 50.0);
        const double f_set = rng.uniform(1.0, 20.0);
        const double band = rng.uniform(0.05, 2.0);
        const double start_pen = rng.uniform(0.01, 2.0) * f_set / k;
        const auto r = hybrid_track(straight_path(2.0), -start_pen, f_set, band, ContactModel::flat(0.0, k), hp);
        EXPECT_DOUBLE_EQ(r.in_band_fraction, 1.0) << "trial " << trial;
    }
}

TEST(HybridTrack, ContactLostAfterDwell) {
    ContactModel cliff;
    cliff.stiffness = 10.0;
    cliff.surface = [](double x, double) { return std::optional<double>(x < 10.0 ? 0.0 : -100.0); };
    EXPECT_THROW(hybrid_track(straight_path(2.0), -0.5, 5.0, 1.0, cliff), ContactLost);
    // A short dip shorter than the dwell is tolerated.
    ContactModel dip;
    dip.stiffness = 10.0;
    dip.surface = [](double x, double) { return std::optional<double>(x > 10.0 && x < 12.0 ? -5.0 : 0.0); };
    EXPECT_NO_THROW(hybrid_track(straight_path(2.0), -0.5, 5.0, 1.0, dip));
}

TEST(HybridTrack, DeterministicAndPreconditions) {
    const auto a = hybrid_track(straight_path(0.5), -0.2, 5.0, 1.0, ContactModel::flat(0.0));
    const auto b = hybrid_track(straight_path(0.5), -0.2, 5.0, 1.0, ContactModel::flat(0.0));
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t n = 0; n < a.trace.size(); ++n) EXPECT_EQ(a.trace[n].ft.fz, b.trace[n].ft.fz);
    EXPECT_THROW(hybrid_track(straight_path(0.5), 0, 0.0, 1.0, ContactModel::flat(0.0)), PreconditionViolation);
    ContactModel bad = ContactModel::flat(0.0);
    bad.stiffness = 0.0;
    EXPECT_THROW(hybrid_track(straight_path(0.5), 0, 5.0, 1.0, bad), PreconditionViolation);
}

TEST(SettleSteps, ClosedForm) {
    EXPECT_EQ(settle_steps_for(4.0, 0.5, 0.5), 3u);
    EXPECT_EQ(settle_steps_for(0.5, 1.0, 0.3), 0u);
    EXPECT_EQ(settle_steps_for(10.0, 1.0, 0.3), 7u);  // 0.7^7 = 0.082 < 0.1 < 0.7^6
}

TEST(MonitorLift, Rules) {
    const ContactModel m = ContactModel::flat(0);
    std::vector<FTReading> quiet(20, m.reading(0.5));
    EXPECT_TRUE(monitor_lift(quiet, 10.0, 0.5));
    auto spiky = quiet;
    spiky[10].fx = 30.0;
    EXPECT_FALSE(monitor_lift(spiky, 10.0, 0.5));
    auto edge = quiet;
    edge[3].fy = 10.0;
    EXPECT_TRUE(monitor_lift(edge, 10.0, 0.5));
    edge[3].fz = 10.5 + 1e-9;
    EXPECT_FALSE(monitor_lift(edge, 10.0, 0.5));
}

TEST(ContactModel, TorqueIsOffsetCrossForce) {
    ContactModel m = ContactModel::flat(0);
    m.offset = {2.0, 0.0};
    const FTReading r = m.reading(5.0);
    EXPECT_DOUBLE_EQ(r.tx, 0.0);
    EXPECT_DOUBLE_EQ(r.ty, -10.0);
    EXPECT_EQ(m.normal_force(0.0, 1.0, 0.0), 0.0);  // above the surface: no sticking
}
