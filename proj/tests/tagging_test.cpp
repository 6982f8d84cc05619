#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "memoplan/tagging.hpp"

using namespace memoplan;

namespace {

Errc error_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::parse;
}

std::uint64_t random_canonical(std::mt19937_64 &rng) {
  return canonicalize(TaggedAddress(rng()));
}

} // namespace

TEST(EncodeTag, Examples) {
  EXPECT_EQ(encode_tag(0x00007FFFDEAD1234ull, 0xABCD).word(), 0xABCD7FFFDEAD1234ull);
  EXPECT_EQ(encode_tag(0, 0).word(), 0ull);
  EXPECT_EQ(encode_tag(0xFFFF80001234ABCDull, 0x0042).word(), 0x004280001234ABCDull);
}

TEST(EncodeTag, RejectsNonCanonical) {
  EXPECT_EQ(error_of([] { encode_tag(0x0001000000000000ull, 1); }), Errc::non_canonical_input);
  EXPECT_EQ(error_of([] { encode_tag(0x0000800000000000ull, 1); }), Errc::non_canonical_input);
  EXPECT_EQ(error_of([] { encode_tag(0xFFFF000000000000ull, 1); }), Errc::non_canonical_input);
}

TEST(Canonicalize, Examples) {
  EXPECT_EQ(canonicalize(TaggedAddress(0xABCD00007FFF1234ull)), 0x000000007FFF1234ull);
  EXPECT_EQ(canonicalize(TaggedAddress(0x004280001234ABCDull)), 0xFFFF80001234ABCDull);
  EXPECT_EQ(canonicalize(TaggedAddress(0)), 0ull);
}

TEST(Canonicalize, IdempotentAndRoundTrips) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100000; ++i) {
    const TaggedAddress w(rng());
    const auto c = canonicalize(w);
    ASSERT_EQ(canonicalize(TaggedAddress(c)), c);
    ASSERT_TRUE(is_canonical(c));
    ASSERT_EQ(c & kPayloadMask, w.payload());

    const auto a = random_canonical(rng);
    const auto t = static_cast<Tag>(rng());
    const auto tagged = encode_tag(a, t);
    ASSERT_EQ(canonicalize(tagged), a);
    ASSERT_EQ(tag_of(tagged), t);
  }
}

TEST(TagCounter, IssuesInOrderAndExhausts) {
  TagCounter c;
  EXPECT_EQ(c.issue(), 0);
  EXPECT_EQ(c.issue(), 1);
  TagCounter last(TagCounter::kLimit - 1);
  EXPECT_EQ(last.issue(), 0xFFFF);
  EXPECT_EQ(error_of([&] { last.issue(); }), Errc::tag_exhausted);
}

TEST(BracketLifetimes, SingleBracket) {
  const std::vector<AllocEvent> ev = {
      AllocEvent::make_malloc(0, encode_tag(0x7f0000001000ull, 0), 4, "conv"),
      AllocEvent::make_free(2, encode_tag(0x7f0000001000ull, 0)),
  };
  const auto t = bracket_lifetimes(ev);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.records[0].id, 0u);
  EXPECT_EQ(t.records[0].size, 4u);
  EXPECT_EQ(t.records[0].lifetime, (LifetimeInterval{0, 2}));
  EXPECT_EQ(t.records[0].op_scope, "conv");
  EXPECT_FALSE(t.records[0].escaped);
}

TEST(BracketLifetimes, AddressReuseIsDisambiguatedByTag) {
  const std::uint64_t x = 0x7f0000002000ull;
  const std::vector<AllocEvent> ev = {
      AllocEvent::make_malloc(0, encode_tag(x, 0), 4, "a"),
      AllocEvent::make_free(1, encode_tag(x, 0)),
      AllocEvent::make_malloc(1, encode_tag(x, 1), 8, "b"),
      AllocEvent::make_free(3, encode_tag(x, 1)),
  };
  const auto t = bracket_lifetimes(ev);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.records[0].id, 0u);
  EXPECT_EQ(t.records[0].lifetime, (LifetimeInterval{0, 1}));
  EXPECT_EQ(t.records[1].id, 1u);
  EXPECT_EQ(t.records[1].lifetime, (LifetimeInterval{1, 3}));
}

TEST(BracketLifetimes, RawMallocAddressesGetCounterTags) {
  const std::uint64_t x = 0xFFFF800000001000ull;
  TagCounter counter(7);
  const std::vector<AllocEvent> ev = {
      AllocEvent::make_malloc(0, TaggedAddress(x), 16, "a"),
      AllocEvent::make_free(4, encode_tag(x, 7)),
  };
  const auto t = bracket_lifetimes(ev, counter);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.records[0].id, 7u);
  EXPECT_EQ(counter.next_tag(), 8u);
}

TEST(BracketLifetimes, NeverFreedEscapesToStreamEnd) {
  const std::vector<AllocEvent> ev = {
      AllocEvent::make_malloc(0, encode_tag(0x1000, 0), 4, "a"),
      AllocEvent::make_malloc(1, encode_tag(0x2000, 1), 4, "b"),
      AllocEvent::make_free(5, encode_tag(0x1000, 0)),
  };
  const auto t = bracket_lifetimes(ev);
  EXPECT_FALSE(t.records[0].escaped);
  EXPECT_TRUE(t.records[1].escaped);
  EXPECT_EQ(t.records[1].lifetime, (LifetimeInterval{1, 6}));
  EXPECT_EQ(t.num_timesteps, 6);
}

TEST(BracketLifetimes, SameStepFreeOccupiesOneStep) {
  const std::vector<AllocEvent> ev = {
      AllocEvent::make_malloc(3, encode_tag(0x1000, 0), 4, "max_pool2d"),
      AllocEvent::make_free(3, encode_tag(0x1000, 0)),
  };
  EXPECT_EQ(bracket_lifetimes(ev).records[0].lifetime, (LifetimeInterval{3, 4}));
}

TEST(BracketLifetimes, Errors) {
  EXPECT_EQ(error_of([] {
              const std::vector<AllocEvent> ev = {AllocEvent::make_free(0, encode_tag(0x1000, 7))};
              bracket_lifetimes(ev);
            }),
            Errc::unmatched_free);
  EXPECT_EQ(error_of([] {
              const std::vector<AllocEvent> ev = {
                  AllocEvent::make_malloc(0, encode_tag(0x1000, 0), 4, "a"),
                  AllocEvent::make_free(1, encode_tag(0x1000, 0)),
                  AllocEvent::make_free(2, encode_tag(0x1000, 0))};
              bracket_lifetimes(ev);
            }),
            Errc::double_free);
  EXPECT_EQ(error_of([] {
              const std::vector<AllocEvent> ev = {
                  AllocEvent::make_malloc(2, encode_tag(0x1000, 0), 4, "a"),
                  AllocEvent::make_free(1, encode_tag(0x1000, 0))};
              bracket_lifetimes(ev);
            }),
            Errc::unordered_events);
  EXPECT_EQ(error_of([] {
              const std::vector<AllocEvent> ev = {
                  AllocEvent::make_malloc(0, encode_tag(0x1000, 9), 4, "a")};
              bracket_lifetimes(ev);
            }),
            Errc::tag_mismatch);
  EXPECT_EQ(error_of([] {
              TagCounter full(TagCounter::kLimit - 1);
              const std::vector<AllocEvent> ev = {
                  AllocEvent::make_malloc(0, TaggedAddress(0x1000), 4, "a"),
                  AllocEvent::make_malloc(0, TaggedAddress(0x2000), 4, "b")};
              bracket_lifetimes(ev, full);
            }),
            Errc::tag_exhausted);
}

TEST(BracketLifetimes, InvariantUnderAddressPermutation) {
  std::mt19937_64 rng(21);
  for (int iter = 0; iter < 200; ++iter) {
    // Random well-formed stream: mallocs with increasing tags, frees later.
    std::vector<AllocEvent> ev;
    std::vector<Tag> live;
    Tag next = 0;
    for (TimeIndex t = 0; t < 30; ++t) {
      if (rng() % 2 || live.empty()) {
        ev.push_back(AllocEvent::make_malloc(t, encode_tag(random_canonical(rng), next), 1 + rng() % 100,
                                             "op" + std::to_string(t)));
        live.push_back(next++);
      } else {
        const auto k = rng() % live.size();
        ev.push_back(AllocEvent::make_free(t, encode_tag(random_canonical(rng), live[k])));
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
      }
    }
    const auto base = bracket_lifetimes(ev);
    std::size_t mallocs = 0;
    for (const auto &e : ev)
      mallocs += e.kind == EventKind::malloc;
    ASSERT_EQ(base.size(), mallocs);

    auto shuffled = ev;
    std::vector<std::uint64_t> payloads;
    for (std::size_t i = 0; i < shuffled.size(); ++i)
      payloads.push_back(random_canonical(rng));
    std::shuffle(payloads.begin(), payloads.end(), rng);
    for (std::size_t i = 0; i < shuffled.size(); ++i)
      shuffled[i].address = encode_tag(payloads[i], shuffled[i].address.tag());
    ASSERT_EQ(bracket_lifetimes(shuffled), base);
  }
}

TEST(EventJsonl, RoundTripAndFormat) {
  const std::vector<AllocEvent> ev = {
      AllocEvent::make_malloc(0, encode_tag(0x7fffdead1234ull, 0xabcd), 4, "conv"),
      AllocEvent::make_free(2, encode_tag(0x7fffdead1234ull, 0xabcd)),
  };
  std::stringstream ss;
  write_events_jsonl(ev, ss);
  EXPECT_EQ(ss.str(),
            "{\"kind\":\"malloc\",\"addr\":\"0xabcd7fffdead1234\",\"size\":4,\"op\":\"conv\",\"time\":0}\n"
            "{\"kind\":\"free\",\"addr\":\"0xabcd7fffdead1234\",\"time\":2}\n");
  const auto back = read_events_jsonl(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].address, ev[0].address);
  EXPECT_EQ(back[1].kind, EventKind::free);
}

TEST(EventJsonl, RejectsMalformed) {
  for (const std::string bad : {
           "{\"kind\":\"malloc\",\"addr\":\"0x10\",\"op\":\"a\",\"time\":0}",
           "{\"kind\":\"grow\",\"addr\":\"0x10\",\"time\":0}",
           "{\"kind\":\"free\",\"addr\":\"zz\",\"time\":0}",
           "{\"kind\":\"free\",\"addr\":\"0x10\"}",
           "{\"kind\":\"free\",\"addr\":\"0x10000000000000000\",\"time\":0}",
       }) {
    std::istringstream in(bad + "\n");
    EXPECT_EQ(error_of([&] { read_events_jsonl(in); }), Errc::parse) << bad;
  }
}
