#include <dfr/graph.hpp>

#include <gtest/gtest.h>

#include "frontier_oracle.hpp"

namespace dfr {
namespace {

const TimeDomain kEpoch = TimeDomain::epochs();
const TimeDomain kLoop = TimeDomain::structured(1, OrderMode::Lexicographic);

ProcessorDecl proc(std::string id, TimeDomain d, BehaviorKind b, ExternalRole role = ExternalRole::None) {
  ProcessorDecl p;
  p.id = std::move(id);
  p.domain = std::move(d);
  p.behavior.kind = b;
  if (b == BehaviorKind::Select) p.behavior.function = "identity";
  p.role = role;
  return p;
}

EdgeDecl edge(std::string id, std::string s, std::string d, ProjectionKind k) {
  return EdgeDecl{std::move(id), std::move(s), std::move(d), ProjectionSpec{k, 1}};
}

GraphSpec loop_graph() {
  return GraphSpec(
      {proc("in", kEpoch, BehaviorKind::IngressSource, ExternalRole::Ingress),
       proc("p", kEpoch, BehaviorKind::StatelessRelay), proc("q", kLoop, BehaviorKind::LoopEgressIncrement),
       proc("y", kLoop, BehaviorKind::Sum), proc("out", kEpoch, BehaviorKind::EgressSink, ExternalRole::Egress)},
      {edge("e1", "in", "p", ProjectionKind::Identity), edge("e2", "p", "q", ProjectionKind::LoopIngress),
       edge("e4", "q", "y", ProjectionKind::Identity), edge("e5", "y", "q", ProjectionKind::Feedback),
       edge("e3", "q", "out", ProjectionKind::LoopEgress)});
}

TEST(Validate, LoopGraphIsWellFormed) { EXPECT_TRUE(validate_graph(loop_graph()).empty()); }

TEST(Validate, EmptyGraph) { EXPECT_TRUE(validate_graph(GraphSpec{}).empty()); }

TEST(Validate, IdentityBetweenEpochsAndSequenceNumbers) {
  GraphSpec g({proc("a", kEpoch, BehaviorKind::StatelessRelay),
               proc("b", TimeDomain::sequence({"e"}), BehaviorKind::StatelessRelay)},
              {edge("e", "a", "b", ProjectionKind::Identity)});
  auto v = validate_graph(g);
  ASSERT_FALSE(v.empty());
  EXPECT_NE(v[0].find("projection domain mismatch"), std::string::npos);
}

TEST(Validate, ReportsEveryViolation) {
  GraphSpec g({proc("a", kEpoch, BehaviorKind::StatelessRelay), proc("a", kEpoch, BehaviorKind::StatelessRelay),
               proc("src", kEpoch, BehaviorKind::IngressSource, ExternalRole::Ingress)},
              {edge("e", "a", "zz", ProjectionKind::Identity), edge("e", "a", "src", ProjectionKind::Identity)});
  auto v = validate_graph(g);
  EXPECT_GE(v.size(), 4u);
}

TEST(Project, IdentityKeepsFrontier) {
  auto f = Frontier::down_close(kEpoch, {LogicalTime::epoch(2)});
  EXPECT_EQ(apply_projection(ProjectionSpec{}, "e", kEpoch, kEpoch, f), f);
}

TEST(Project, LoopIngressAddsWildcardCounter) {
  auto f = Frontier::down_close(kEpoch, {LogicalTime::epoch(1)});
  auto g = apply_projection(ProjectionSpec{ProjectionKind::LoopIngress}, "e2", kEpoch, kLoop, f);
  EXPECT_EQ(g.to_string(), "{tuple:1.*}");
}

TEST(Project, SentCountReadsRecordedCount) {
  auto dst = TimeDomain::sequence({"e3"});
  ProjectionContext ctx;
  ctx.sent_count = 3;
  auto g = apply_projection(ProjectionSpec{ProjectionKind::SentCount}, "e3", kEpoch, dst, Frontier::top(kEpoch), &ctx);
  EXPECT_EQ(g.to_string(), "{seq:e3:3}");
}

TEST(Project, EpochToSeqSumsEpochsInFrontier) {
  auto dst = TimeDomain::sequence({"e"});
  ProjectionContext ctx;
  ctx.epoch_counts = {{1, 73}, {2, 5}};
  auto f = Frontier::down_close(kEpoch, {LogicalTime::epoch(1)});
  auto g = apply_projection(ProjectionSpec{ProjectionKind::EpochToSeq}, "e", kEpoch, dst, f, &ctx);
  EXPECT_EQ(g.to_string(), "{seq:e:73}");
}

TEST(Project, HistoryDependentNeedsContext) {
  auto dst = TimeDomain::sequence({"e"});
  try {
    apply_projection(ProjectionSpec{ProjectionKind::SentCount}, "e", kEpoch, dst, Frontier::top(kEpoch));
    FAIL();
  } catch (const Error& err) {
    EXPECT_NE(std::string(err.what()).find("projection requires recorded metadata"), std::string::npos);
  }
}

TEST(Project, SeqToEpochCountsCompleteWindows) {
  auto src = TimeDomain::sequence({"e"});
  ProjectionSpec spec{ProjectionKind::SeqToEpoch, 3};
  auto at = [&](std::int64_t s) {
    return apply_projection(spec, "x", src, kEpoch, Frontier::down_close(src, {LogicalTime::seq("e", s)}));
  };
  EXPECT_TRUE(at(2).is_empty());
  EXPECT_EQ(at(3).to_string(), "{epoch:0}");
  EXPECT_EQ(at(8).to_string(), "{epoch:1}");
}

TEST(Project, LoopEgressOnLexicographicCounterKeepsEarlierEpochs) {
  auto f = Frontier::down_close(kLoop, {LogicalTime::tuple(2, {5})});
  auto g = apply_projection(ProjectionSpec{ProjectionKind::LoopEgress}, "e3", kLoop, kEpoch, f);
  EXPECT_EQ(g.to_string(), "{epoch:1}");
  auto prod = TimeDomain::structured(1, OrderMode::Product);
  auto h = apply_projection(ProjectionSpec{ProjectionKind::LoopEgress}, "e3", prod, kEpoch,
                            Frontier::down_close(prod, {LogicalTime::tuple(2, {5})}));
  EXPECT_TRUE(h.is_empty());
}

TEST(Project, FeedbackAdvancesCounter) {
  auto f = Frontier::down_close(kLoop, {LogicalTime::tuple(1, {3})});
  auto g = apply_projection(ProjectionSpec{ProjectionKind::Feedback}, "e5", kLoop, kLoop, f);
  EXPECT_EQ(g.to_string(), "{tuple:1.4}");
}

TEST(Project, EmptyAndTop) {
  for (auto k : {ProjectionKind::Identity, ProjectionKind::LoopIngress, ProjectionKind::LoopEgress}) {
    const auto& src = k == ProjectionKind::LoopEgress ? kLoop : kEpoch;
    const auto& dst = k == ProjectionKind::LoopIngress ? kLoop : kEpoch;
    EXPECT_TRUE(apply_projection(ProjectionSpec{k}, "e", src, dst, Frontier::empty(src)).is_empty());
    EXPECT_TRUE(apply_projection(ProjectionSpec{k}, "e", src, dst, Frontier::top(src)).is_top());
  }
}

struct LevelPair {
  TimeDomain outer;
  TimeDomain inner;
};

std::vector<LevelPair> level_pairs() {
  return {{kEpoch, kLoop},
          {kEpoch, TimeDomain::structured(1, OrderMode::Product)},
          {TimeDomain::structured(1, OrderMode::Product), TimeDomain::structured(2, OrderMode::Product)},
          {kLoop, TimeDomain::structured(2, OrderMode::Lexicographic)}};
}

TEST(ProjectProperty, EgressAfterIngressIsIdentity) {
  std::mt19937_64 rng(5);
  for (const auto& [outer, inner] : level_pairs()) {
    for (int i = 0; i < 300; ++i) {
      auto f = testing::random_frontier(rng, outer);
      auto in = apply_projection(ProjectionSpec{ProjectionKind::LoopIngress}, "e", outer, inner, f);
      EXPECT_EQ(apply_projection(ProjectionSpec{ProjectionKind::LoopEgress}, "e", inner, outer, in), f)
          << f.to_string();
    }
  }
}

TEST(ProjectProperty, StaticKindsAreMonotone) {
  std::mt19937_64 rng(9);
  for (const auto& [outer, inner] : level_pairs()) {
    for (int i = 0; i < 300; ++i) {
      auto a = testing::random_frontier(rng, inner);
      auto b = a.unite(testing::random_frontier(rng, inner));
      for (auto k : {ProjectionKind::LoopEgress, ProjectionKind::Feedback}) {
        const auto& dst = k == ProjectionKind::LoopEgress ? outer : inner;
        EXPECT_TRUE(apply_projection(ProjectionSpec{k}, "e", inner, dst, a)
                        .subset_of(apply_projection(ProjectionSpec{k}, "e", inner, dst, b)));
      }
      auto c = testing::random_frontier(rng, outer);
      auto d = c.unite(testing::random_frontier(rng, outer));
      EXPECT_TRUE(apply_projection(ProjectionSpec{ProjectionKind::LoopIngress}, "e", outer, inner, c)
                      .subset_of(apply_projection(ProjectionSpec{ProjectionKind::LoopIngress}, "e", outer, inner, d)));
    }
  }
}

TEST(ProjectProperty, LoopEgressIsSafeAgainstEnumeration) {
  // Every outer time in the image must have all of its iterations inside f.
  std::mt19937_64 rng(13);
  auto inner = kLoop;
  for (int i = 0; i < 300; ++i) {
    auto f = testing::random_frontier(rng, inner);
    auto g = apply_projection(ProjectionSpec{ProjectionKind::LoopEgress}, "e", inner, kEpoch, f);
    for (std::int64_t e = 0; e <= testing::kUniverseMax; ++e) {
      if (!g.contains(LogicalTime::epoch(e))) continue;
      for (std::int64_t c = 0; c <= testing::kUniverseMax; ++c) {
        EXPECT_TRUE(f.contains(LogicalTime::tuple(e, {c}))) << f.to_string() << " -> " << g.to_string();
      }
    }
  }
}

TEST(ProjectProperty, HistoryDependentMonotoneInRecordedCounts) {
  std::mt19937_64 rng(17);
  auto dst = TimeDomain::sequence({"e"});
  for (int i = 0; i < 200; ++i) {
    ProjectionContext ctx;
    for (std::int64_t ep = 0; ep < 6; ++ep) ctx.epoch_counts[ep] = static_cast<std::int64_t>(rng() % 5);
    auto a = testing::random_frontier(rng, kEpoch);
    auto b = a.unite(testing::random_frontier(rng, kEpoch));
    EXPECT_TRUE(apply_projection(ProjectionSpec{ProjectionKind::EpochToSeq}, "e", kEpoch, dst, a, &ctx)
                    .subset_of(apply_projection(ProjectionSpec{ProjectionKind::EpochToSeq}, "e", kEpoch, dst, b, &ctx)));
  }
}

TEST(Translate, StaticKinds) {
  auto t = LogicalTime::tuple(1, {3});
  EXPECT_EQ(translate_time(ProjectionSpec{ProjectionKind::Feedback}, t), LogicalTime::tuple(1, {4}));
  EXPECT_EQ(translate_time(ProjectionSpec{ProjectionKind::LoopEgress}, t), LogicalTime::epoch(1));
  EXPECT_EQ(translate_time(ProjectionSpec{ProjectionKind::LoopIngress}, LogicalTime::epoch(1)),
            LogicalTime::tuple(1, {0}));
  EXPECT_THROW(translate_time(ProjectionSpec{ProjectionKind::SentCount}, t), Error);
}

}  // namespace
}  // namespace dfr
