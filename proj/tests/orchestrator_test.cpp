#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "decake/orchestrator.hpp"
#include "decake/report.hpp"

using namespace decake;

namespace {

Config small_config(int parts) {
    Config cfg;
    cfg.scene.n_parts = parts;
    return cfg;
}

Candidate candidate(const Detection& d, double area, double z) {
    Candidate c{&d, {}};
    c.estimate.exposed_area = area;
    c.estimate.centroid = {0, 0, z};
    c.estimate.pickable = true;
    return c;
}

bool transition_allowed(CellState a, CellState b) {
    const auto next = allowed_transitions(a);
    return std::find(next.begin(), next.end(), b) != next.end();
}

// Powder on a part's two faces, in the part frame of its current top.
struct Faces {
    GridField top;
    GridField bottom;
    bool face_up;
};

std::vector<Faces> faces_of(const SceneState& s) {
    std::vector<Faces> out;
    for (const auto& p : s.parts) out.push_back({p.powder_top, p.powder_bottom, p.face_up});
    return out;
}

// True when no powder cell grew between two snapshots of the same part.
bool no_cell_grew(const Faces& before, const Faces& after) {
    const GridField& top = before.face_up == after.face_up ? before.top : before.bottom.mirrored_rows();
    const GridField& bottom = before.face_up == after.face_up ? before.bottom : before.top.mirrored_rows();
    for (std::size_t k = 0; k < top.size(); ++k)
        if (after.top[k] > top[k] || after.bottom[k] > bottom[k]) return false;
    return true;
}

}  // namespace

TEST(SelectNextPart, LargerExposedAreaWins) {
    Detection a, b;
    a.part_id = 0;
    b.part_id = 1;
    const std::vector<Candidate> c{candidate(a, 10000, 50), candidate(b, 8000, 60)};
    // Scores: 0.5 + 0.5*50/60 = 0.917 against 0.4 + 0.5 = 0.9.
    EXPECT_EQ(select_next_part(c), 0u);
}

TEST(SelectNextPart, IgnoresUnpickableAndEmpty) {
    EXPECT_FALSE(select_next_part(std::span<const Candidate>{}).has_value());
    Detection a, b;
    a.part_id = 0;
    b.part_id = 1;
    std::vector<Candidate> c{candidate(a, 10000, 50), candidate(b, 100, 10)};
    c[0].estimate.pickable = false;
    EXPECT_EQ(select_next_part(c), 1u);
    c[1].estimate.pickable = false;
    EXPECT_FALSE(select_next_part(c).has_value());
}

TEST(SelectNextPart, ArgmaxInvariantUnderScalingAndOrder) {
    Rng rng(31);
    for (int trial = 0; trial < 500; ++trial) {
        const int n = static_cast<int>(rng.uniform_int(1, 8));
        std::vector<Detection> dets(static_cast<std::size_t>(n));
        std::vector<Candidate> c;
        for (int k = 0; k < n; ++k) {
            dets[static_cast<std::size_t>(k)].part_id = k;
            c.push_back(candidate(dets[static_cast<std::size_t>(k)], rng.uniform(1000.0, 20000.0), rng.uniform(5.0, 100.0)));
        }
        const int chosen = *c[*select_next_part(c)].detection->part_id;
        // Brute-force oracle.
        double max_a = 0, max_z = 0;
        for (const auto& x : c) max_a = std::max(max_a, x.estimate.exposed_area), max_z = std::max(max_z, x.estimate.centroid.z);
        int oracle = -1;
        double best = -1;
        for (const auto& x : c) {
            const double s = 0.5 * x.estimate.exposed_area / max_a + 0.5 * x.estimate.centroid.z / max_z;
            if (s > best) best = s, oracle = *x.detection->part_id;
        }
        EXPECT_EQ(chosen, oracle);
        // Power-of-two scaling keeps every ratio exact.
        auto scaled = c;
        for (auto& x : scaled) x.estimate.exposed_area *= 4.0, x.estimate.centroid.z *= 0.5;
        EXPECT_EQ(*scaled[*select_next_part(scaled)].detection->part_id, chosen);
        auto reversed = c;
        std::reverse(reversed.begin(), reversed.end());
        EXPECT_EQ(*reversed[*select_next_part(reversed)].detection->part_id, chosen);
    }
}

TEST(SelectNextPart, SpanOverloadChecksSizes) {
    std::vector<Detection> d(2);
    std::vector<PoseEstimate> e(1);
    EXPECT_THROW(select_next_part(d, e), PreconditionViolation);
}

TEST(CellMachine, DefaultRunFinishesEveryPart) {
    const Config cfg;
    const RunReport r = run_generated(cfg, 42);
    EXPECT_EQ(r.parts_done, 10);
    EXPECT_EQ(r.parts_skipped, 0);
    EXPECT_GT(r.removal.mean, 0.0);
    EXPECT_GT(r.dust_collected, 0.0);
    for (const auto& row : r.rows) {
        EXPECT_GE(row.mass_before, row.mass_after);
        EXPECT_GE(row.mass_after, row.clean_mass - 1e-9);
        EXPECT_NEAR(row.brushing_time, 20.0, 1e-9);
    }
}

TEST(CellMachine, EmptyBinHaltsAfterOneLook) {
    SceneState s = scene_generate(1, 0, 26.2, 8.0);
    CellMachine m(s, Config{}, 1);
    while (!m.halted()) m.step();
    ASSERT_EQ(m.transitions().size(), 2u);
    EXPECT_EQ(m.transitions()[0], std::pair(CellState::LocalizeBin, CellState::NextOrFinish));
    EXPECT_EQ(m.transitions()[1], std::pair(CellState::NextOrFinish, CellState::Halt));
    ASSERT_EQ(m.log().entries().size(), 1u);
    EXPECT_EQ(m.log().entries()[0].action, "localize_bin");
    const RunReport r = m.report();
    EXPECT_EQ(r.parts_done, 0);
    EXPECT_EQ(r.brushing_fraction, 0.0);
}

TEST(CellMachine, ScriptedSealFailuresWithinBudgetStillFinish) {
    const Config cfg = small_config(3);
    CellMachine m(scene_generate(cfg.scene, 5), cfg, 5);
    m.script_fault(Failure::SealFail);
    m.script_fault(Failure::SealFail);
    while (!m.halted()) m.step();
    const RunReport r = m.report();
    EXPECT_EQ(r.parts_done, 3);
    int failures = 0;
    for (const auto& row : r.rows) failures += row.failures;
    EXPECT_EQ(failures, 2);
    const auto seal = std::count_if(r.timeline.begin(), r.timeline.end(),
                                    [](const ActionRecord& e) { return e.outcome == "SealFail"; });
    EXPECT_EQ(seal, 2);
}

TEST(CellMachine, ExhaustedBudgetSkipsPart) {
    Config cfg = small_config(1);
    cfg.policy.max_retries = 1;
    CellMachine m(scene_generate(cfg.scene, 5), cfg, 5);
    m.script_fault(Failure::SealFail);
    m.script_fault(Failure::SealFail);
    while (!m.halted()) m.step();
    const RunReport r = m.report();
    EXPECT_EQ(r.parts_done, 0);
    EXPECT_EQ(r.parts_skipped, 1);
    EXPECT_EQ(r.rows[0].outcome, PartStatus::Skipped);
}

TEST(CellMachine, UnflippablePartsAreSkipped) {
    Config cfg = small_config(2);
    cfg.scene.part.footprint = Polygon2::rectangle(60, 60);
    cfg.scene.part.thickness = 40;
    const SceneState s = scene_generate(cfg.scene, 3);
    const double mass = s.total_mass();
    CellMachine m(s, cfg, 3);
    while (!m.halted()) m.step();
    EXPECT_EQ(m.report().parts_skipped, 2);
    EXPECT_NEAR(m.scene().total_mass(), mass, 1e-9 * mass);
}

TEST(CellMachine, TimelineAndTransitionsAreConsistent) {
    const Config cfg;
    CellMachine m(scene_generate(cfg.scene, 42), cfg, 42);
    while (!m.halted()) m.step();
    const RunReport r = m.report();
    for (const auto& [a, b] : m.transitions()) EXPECT_TRUE(transition_allowed(a, b)) << to_string(a) << " -> " << to_string(b);
    // Back-to-back entries; per-part cycle time is the sum of its entries.
    double clock = 0.0, attributed = 0.0;
    for (const auto& e : r.timeline) {
        EXPECT_DOUBLE_EQ(e.start, clock);
        clock = e.end;
        if (e.part_id) attributed += e.duration();
    }
    EXPECT_DOUBLE_EQ(clock, r.total_time);
    double rows = 0.0;
    for (const auto& row : r.rows) rows += row.cycle_time;
    EXPECT_NEAR(rows, attributed, 1e-9);
    // Every flip-area pick comes after a relocalization that follows the flip.
    for (std::size_t k = 0; k < r.timeline.size(); ++k) {
        if (r.timeline[k].action != "pick_flip") continue;
        std::size_t flip = k, reloc = k;
        while (flip > 0 && r.timeline[flip].action != "flip") --flip;
        while (reloc > 0 && r.timeline[reloc].action != "relocalize") --reloc;
        EXPECT_EQ(r.timeline[flip].action, "flip");
        EXPECT_GT(reloc, flip);
    }
}

TEST(CellMachine, TerminationAndConservationFuzz) {
    Rng rng(2718);
    const FailureAction actions[] = {FailureAction::Retry, FailureAction::RelocalizeRetry, FailureAction::OffsetRetry,
                                     FailureAction::Skip};
    for (int trial = 0; trial < 1000; ++trial) {
        Config cfg = small_config(static_cast<int>(rng.uniform_int(0, 3)));
        cfg.policy.max_retries = static_cast<int>(rng.uniform_int(0, 2));
        for (Failure f : kAllFailures) cfg.policy.actions[f] = actions[rng.uniform_int(0, 3)];
        cfg.faults = {rng.uniform(0.0, 0.4), rng.uniform(0.0, 0.4), rng.uniform(0.0, 0.4), rng.uniform(0.0, 0.4),
                      rng.uniform(0.0, 0.4)};
        cfg.set_brushing_budget(rng.uniform(1.0, 8.0));
        const auto seed = static_cast<std::uint64_t>(trial);
        CellMachine m(scene_generate(cfg.scene, seed), cfg, seed);
        const double mass = m.scene().total_mass();
        auto faces = faces_of(m.scene());
        const std::size_t bound = m.step_bound();
        while (!m.halted()) {
            ASSERT_LT(m.steps(), bound) << "trial " << trial;
            m.step();
            const auto now = faces_of(m.scene());
            for (std::size_t k = 0; k < now.size(); ++k) ASSERT_TRUE(no_cell_grew(faces[k], now[k])) << "trial " << trial;
            faces = now;
        }
        EXPECT_NEAR(m.scene().total_mass(), mass, 1e-9 * std::max(1.0, mass)) << "trial " << trial;
        for (const auto& p : m.scene().parts)
            EXPECT_TRUE(p.status == PartStatus::Done || p.status == PartStatus::Skipped) << "trial " << trial;
    }
}

TEST(CellMachine, ReportIsByteIdenticalAcrossRuns) {
    const Config cfg;
    const std::string a = to_json(run_generated(cfg, 42)).dump();
    const std::string b = to_json(run_generated(cfg, 42)).dump();
    EXPECT_EQ(a, b);
    Config faulty = cfg;
    faulty.faults.seal_fail = 0.2;
    faulty.faults.unreachable = 0.1;
    EXPECT_EQ(to_json(run_generated(faulty, 7)).dump(), to_json(run_generated(faulty, 7)).dump());
}

TEST(RunBatch, OrderedAndThreadIndependent) {
    Config cfg = small_config(3);
    const auto one = run_batch(cfg, 10, 4, 1);
    const auto many = run_batch(cfg, 10, 4, 4);
    ASSERT_EQ(one.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(one[k].seed, 10 + k);
        EXPECT_EQ(to_json(one[k]).dump(), to_json(many[k]).dump());
    }
    EXPECT_THROW(run_batch(cfg, 0, -1), PreconditionViolation);
}

TEST(Summaries, SampleStatistics) {
    const Stat s = summarize({1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_NEAR(s.sd, std::sqrt(5.0 / 3.0), 1e-12);
    EXPECT_EQ(summarize({}).mean, 0.0);
    EXPECT_DOUBLE_EQ(removal_fraction(48.6, 37.6, 22.4), 11.0 / 26.2);
    EXPECT_EQ(removal_fraction(22.4, 22.4, 22.4), 0.0);
    EXPECT_EQ(human_baseline().size(), 3u);
}
