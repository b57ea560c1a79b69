#include <doctest.h>

#include <cmath>

#include "qemind/glassbox.hpp"
#include "qemind/random.hpp"
#include "test_util.hpp"

using namespace qemind;

namespace {

// src vocab {<unk>, a, b}; tgt vocab {<unk>, x, y}; bigram rows for <unk>, x, y, BOS.
ToyLexicalModel small_model(double lambda) {
  return ToyLexicalModel({"<unk>", "a", "b"}, {"<unk>", "x", "y"},
                         {1.0 / 3, 1.0 / 3, 1.0 / 3,  //
                          0.1, 0.7, 0.2,              //
                          0.1, 0.3, 0.6},
                         {1.0 / 3, 1.0 / 3, 1.0 / 3,  //
                          0.2, 0.2, 0.6,              //
                          0.2, 0.5, 0.3,              //
                          0.1, 0.5, 0.4},
                         lambda, 0.1);
}

ToyLexicalModel fixture_model() { return train_toy_model(load_parallel_corpus(test::data_path("fixture_corpus.tsv")), 0.1, 0.7); }

void check_row_stochastic(const ToyLexicalModel& m) {
  const std::size_t v = m.tgt_vocab().size();
  for (std::size_t s = 0; s < m.src_vocab().size(); ++s) {
    double sum = 0.0;
    for (std::size_t t = 0; t < v; ++t) sum += m.trans(s, t);
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
  for (std::size_t p = 0; p <= v; ++p) {
    double sum = 0.0;
    for (std::size_t t = 0; t < v; ++t) sum += m.bigram(p, t);
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
}

}  // namespace

TEST_CASE("ConstantModel returns ln p per step") {
  ConstantModel m(0.5);
  const auto lp = m.force_decode({"a"}, {"x", "y", "z"}, DropoutSpec::off());
  REQUIRE(lp.size() == 3);
  for (double v : lp) CHECK(v == std::log(0.5));
  CHECK_THROWS_AS(m.force_decode({}, {"x"}, DropoutSpec::off()), Error);
  CHECK_THROWS_AS(m.force_decode({"a"}, {}, DropoutSpec::off()), Error);
}

TEST_CASE("force_decode matches a hand evaluation of the step distribution") {
  const double lam = 0.7;
  const auto m = small_model(lam);
  auto score = [&](double t, double b) { return std::pow(t, lam) * std::pow(b, 1.0 - lam); };
  // step 0: source a, prev BOS, target y
  const double z0 = score(0.1, 0.1) + score(0.7, 0.5) + score(0.2, 0.4);
  const double p0 = score(0.2, 0.4) / z0;
  // step 1: source b, prev y, target x
  const double z1 = score(0.1, 0.2) + score(0.3, 0.5) + score(0.6, 0.3);
  const double p1 = score(0.3, 0.5) / z1;
  // step 2: clamped source b, prev x, target OOV -> <unk>
  const double z2 = score(0.1, 0.2) + score(0.3, 0.2) + score(0.6, 0.6);
  const double p2 = score(0.1, 0.2) / z2;

  const auto lp = m.force_decode({"a", "b"}, {"y", "x", "zzz"}, DropoutSpec::off());
  REQUIRE(lp.size() == 3);
  CHECK(lp[0] == doctest::Approx(std::log(p0)).epsilon(1e-12));
  CHECK(lp[1] == doctest::Approx(std::log(p1)).epsilon(1e-12));
  CHECK(lp[2] == doctest::Approx(std::log(p2)).epsilon(1e-12));
}

TEST_CASE("greedy_translate picks the argmax and agrees with forced decoding") {
  const auto m = small_model(0.7);
  const auto out = m.greedy_translate({"a", "b", "q"}, DropoutSpec::off());
  CHECK(out.tokens.size() == 3);
  CHECK(out.tokens[0] == "x");
  CHECK(m.force_decode({"a", "b", "q"}, out.tokens, DropoutSpec::off()) == out.step_logprobs);
  CHECK(m.greedy_translate({"a", "b", "q"}, DropoutSpec::off()) == out);
}

TEST_CASE("greedy ties break to the lexicographically smallest token") {
  // Uniform tables: every token ties.
  const double u = 1.0 / 3;
  ToyLexicalModel m({"<unk>", "a"}, {"<unk>", "p", "q"}, {u, u, u, u, u, u}, std::vector<double>(12, u), 0.5, 1.0);
  CHECK(m.greedy_translate({"a", "a"}, DropoutSpec::off()).tokens == TokenSeq{"<unk>", "<unk>"});
}

TEST_CASE("lambda 1 with a near-permutation table gives the dictionary translation") {
  const double e = 1e-3;
  ToyLexicalModel m({"<unk>", "a", "b"}, {"<unk>", "x", "y"},
                    {1.0 - 2 * e, e, e, e, 1.0 - 2 * e, e, e, e, 1.0 - 2 * e}, std::vector<double>(12, 1.0 / 3), 1.0,
                    0.1);
  CHECK(m.greedy_translate({"b", "a", "b"}, DropoutSpec::off()).tokens == TokenSeq{"y", "x", "y"});
}

TEST_CASE("train_toy_model counts and smooths") {
  SUBCASE("disjoint pairs with tiny alpha") {
    const auto m = train_toy_model({{{"a"}, {"x"}}, {{"b"}, {"y"}}}, 1e-9, 0.5);
    CHECK(m.trans(m.src_index("a"), m.tgt_index("x")) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(m.trans(m.src_index("b"), m.tgt_index("y")) == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("large alpha approaches uniform") {
    const auto m = train_toy_model({{{"a"}, {"x"}}, {{"b"}, {"y"}}}, 1e9, 0.5);
    CHECK(m.trans(m.src_index("a"), m.tgt_index("x")) == doctest::Approx(1.0 / 3).epsilon(1e-6));
  }
  SUBCASE("exact add-alpha counts") {
    // a->x twice, a->y once; bigram BOS->x twice, BOS->y once, x->y once.
    const auto m = train_toy_model({{{"a"}, {"x"}}, {{"a"}, {"x", "y"}}, {{"a", "a"}, {"y"}}}, 0.5, 0.5);
    CHECK(m.tgt_vocab() == std::vector<std::string>{"<unk>", "x", "y"});
    CHECK(m.trans(m.src_index("a"), m.tgt_index("x")) == doctest::Approx(2.5 / 4.5).epsilon(1e-15));
    CHECK(m.trans(m.src_index("a"), m.tgt_index("y")) == doctest::Approx(1.5 / 4.5).epsilon(1e-15));
    CHECK(m.bigram(m.bos_row(), m.tgt_index("x")) == doctest::Approx(2.5 / 4.5).epsilon(1e-15));
    CHECK(m.bigram(m.tgt_index("x"), m.tgt_index("y")) == doctest::Approx(1.5 / 2.5).epsilon(1e-15));
  }
  CHECK_THROWS_AS(train_toy_model({}, 0.1, 0.5), Error);
  CHECK_THROWS_AS(train_toy_model({{{"a"}, {"x"}}}, 0.0, 0.5), Error);
}

TEST_CASE("trained tables are row-stochastic") {
  const auto m = fixture_model();
  check_row_stochastic(m);
}

TEST_CASE("perturbation preserves row-stochasticity (property)") {
  const auto m = fixture_model();
  SplitMix64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const double rate = 0.05 + 0.9 * rng.uniform();
    const auto p = m.perturbed(rate, rng.next());
    check_row_stochastic(p);
    CHECK(p.bigram_table() == m.bigram_table());
  }
}

TEST_CASE("perturbation edge cases") {
  const auto m = small_model(0.7);
  CHECK(m.perturbed(0.0, 123).trans_table() == m.trans_table());
  CHECK(m.perturbed(0.4, 9).trans_table() == m.perturbed(0.4, 9).trans_table());

  // Find a seed where every draw in row "a" fires: that row becomes uniform.
  const double rate = 0.9;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    SplitMix64 rng(seed);
    bool all = true;
    for (int k = 0; k < 9; ++k) {
      const bool fire = rng.bernoulli(rate);
      if (k >= 3 && k < 6) all = all && fire;
    }
    if (!all) continue;
    const auto p = m.perturbed(rate, seed);
    for (std::size_t t = 0; t < 3; ++t) CHECK(p.trans(1, t) == doctest::Approx(1.0 / 3).epsilon(1e-12));
    break;
  }
}

TEST_CASE("dropout seeding contract") {
  const auto m = fixture_model();
  const TokenSeq src = tokenize("a1 a2 a3 a4 a5 a6 a7 a8");
  CHECK(m.greedy_translate(src, {0.0, 77}) == m.greedy_translate(src, DropoutSpec::off()));
  CHECK(m.force_decode(src, src, {0.0, 77}) == m.force_decode(src, src, DropoutSpec::off()));
  CHECK(m.greedy_translate(src, {0.5, 1}) == m.greedy_translate(src, {0.5, 1}));
  bool differs = false;
  for (std::uint64_t s = 2; s < 20 && !differs; ++s) {
    differs = !(m.greedy_translate(src, {0.5, 1}) == m.greedy_translate(src, {0.5, s}));
  }
  CHECK(differs);
}

TEST_CASE("mc_dropout_samples") {
  const auto m = fixture_model();
  const TokenSeq src = tokenize("a3 a9 a12 a0");
  const auto off = mc_dropout_samples(m, src, 4, 0.0, 1);
  REQUIRE(off.size() == 4);
  for (const auto& s : off) CHECK(s == m.greedy_translate(src, DropoutSpec::off()));

  const auto a = mc_dropout_samples(m, src, 6, 0.3, 42);
  CHECK(a == mc_dropout_samples(m, src, 6, 0.3, 42));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == m.greedy_translate(src, {0.3, derive_seed(42, i, SeedPurpose::DropoutDraw)}));
  }
  const auto one = mc_dropout_samples(m, src, 1, 0.3, 42);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == a[0]);
  CHECK_THROWS_AS(mc_dropout_samples(m, src, 0, 0.3, 1), Error);
  CHECK_THROWS_AS(mc_dropout_samples(m, src, 2, 1.0, 1), Error);
}

TEST_CASE("step log-probabilities stay within [ln floor, 0]") {
  const auto m = fixture_model();
  SplitMix64 rng(11);
  const double lo = std::log(kProbFloor);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSeq src, mt;
    for (std::size_t k = 1 + rng.index(10); k > 0; --k) src.push_back("a" + std::to_string(rng.index(35)));
    for (std::size_t k = 1 + rng.index(10); k > 0; --k) mt.push_back("b" + std::to_string(rng.index(35)));
    const auto lp = m.force_decode(src, mt, {0.5, rng.next()});
    CHECK(lp.size() == mt.size());
    for (double v : lp) {
      CHECK(v <= 0.0);
      CHECK(v >= lo);
    }
    const auto g = m.greedy_translate(src, {0.9, rng.next()});
    CHECK(g.tokens.size() == src.size());
    CHECK(g.step_logprobs.size() == src.size());
  }
}

TEST_CASE("toy model JSON round-trip") {
  test::TempDir dir;
  const auto m = fixture_model();
  m.save(dir / "toy.json");
  const auto back = ToyLexicalModel::load(dir / "toy.json");
  CHECK(back.trans_table() == m.trans_table());
  CHECK(back.bigram_table() == m.bigram_table());
  CHECK(back.src_vocab() == m.src_vocab());
  CHECK(back.lambda() == m.lambda());
  const auto j = m.to_json();
  for (const char* key : {"src_vocab", "tgt_vocab", "trans_table", "bigram_table", "lambda", "alpha", "floor"}) {
    CHECK(j.contains(key));
  }
  auto bad = j;
  bad["trans_table"][0] = 0.9;
  CHECK_THROWS_AS(ToyLexicalModel::from_json(bad), Error);
}

TEST_CASE("unigram MLM fill") {
  const std::vector<TokenSeq> corpus = {{"a", "b", "a"}, {"c"}};
  const auto mlm = UnigramMlm::build(corpus);
  CHECK(mlm.vocab() == std::vector<std::string>{"a", "b", "c"});
  CHECK(mlm.probs()[0] == doctest::Approx(3.0 / 7).epsilon(1e-15));

  CHECK(mlm.fill({"x", "y"}, 3) == TokenSeq{"x", "y"});
  const TokenSeq masked = {"x", "<mask>", "<mask>", "y"};
  CHECK(mlm.fill(masked, 3) == mlm.fill(masked, 3));
  CHECK(unigram_mlm_fill(mlm, masked, 3) == mlm.fill(masked, 3));

  // Inverse-CDF trace with an independent draw of the same stream.
  SplitMix64 rng(3);
  TokenSeq expect = masked;
  for (auto* tok : {&expect[1], &expect[2]}) {
    const double u = rng.uniform();
    *tok = u < 3.0 / 7 ? "a" : (u < 5.0 / 7 ? "b" : "c");
  }
  CHECK(mlm.fill(masked, 3) == expect);

  const UnigramMlm single({"w"}, {1.0});
  CHECK(single.fill({"<mask>", "z", "<mask>"}, 8) == TokenSeq{"w", "z", "w"});
  CHECK_THROWS_AS(UnigramMlm({}, {}), Error);
  CHECK_THROWS_AS(UnigramMlm::build(std::vector<TokenSeq>{{"<mask>"}}), Error);
}

TEST_CASE("generate_noised_input examples") {
  const auto mlm = UnigramMlm::build(std::vector<TokenSeq>{{"a", "b", "c", "d"}, {"a"}});
  const TokenSeq x = {"a", "b", "c"};

  SUBCASE("no edits is the identity") {
    for (int r = 1; r <= 4; ++r) CHECK(generate_noised_input(x, {r, 0.0, 0.0}, mlm, 1234 + r) == x);
  }
  SUBCASE("delete everything leaves one filled mask") {
    const std::uint64_t seed = 99;
    const auto out = generate_noised_input(x, {1, 0.0, 1.0}, mlm, seed);
    REQUIRE(out.size() == 1);
    CHECK(out == mlm.fill({"<mask>"}, derive_seed(seed, 0, SeedPurpose::MlmFill)));
  }
  SUBCASE("insert at every gap") {
    const TokenSeq ab = {"a", "b"};
    const std::uint64_t seed = 5;
    const auto out = generate_noised_input(ab, {1, 1.0, 0.0}, mlm, seed);
    REQUIRE(out.size() == 5);
    CHECK(out[1] == "a");
    CHECK(out[3] == "b");
    CHECK(out == mlm.fill({"<mask>", "a", "<mask>", "b", "<mask>"}, derive_seed(seed, 0, SeedPurpose::MlmFill)));
  }
  SUBCASE("invalid config") {
    CHECK_THROWS_AS(generate_noised_input(x, {0, 0.1, 0.1}, mlm, 1), Error);
    CHECK_THROWS_AS(generate_noised_input(x, {1, 1.5, 0.1}, mlm, 1), Error);
    CHECK_THROWS_AS(generate_noised_input({}, {1, 0.1, 0.1}, mlm, 1), Error);
  }
}

TEST_CASE("noised length stays bounded (property)") {
  const auto mlm = UnigramMlm::build(std::vector<TokenSeq>{{"a", "b", "c"}});
  SplitMix64 rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const int rounds = 1 + static_cast<int>(rng.index(4));
    const double p_i = 0.5 * rng.uniform();
    const double p_d = rng.uniform();
    TokenSeq x;
    for (std::size_t k = 1 + rng.index(20); k > 0; --k) x.push_back("t" + std::to_string(k));
    const auto out = generate_noised_input(x, {rounds, p_i, p_d}, mlm, rng.next());
    CHECK(out.size() >= 1);
    CHECK(out.size() <= (x.size() + rounds) * (std::size_t{1} << rounds));
    for (const auto& t : out) CHECK(t != kMaskToken);
  }
}

TEST_CASE("noise is deterministic per seed") {
  const auto mlm = UnigramMlm::build(std::vector<TokenSeq>{{"a", "b", "c"}});
  const TokenSeq x = tokenize("a b c d e f");
  const NoiseConfig cfg{3, 0.3, 0.3};
  CHECK(generate_noised_input(x, cfg, mlm, 17) == generate_noised_input(x, cfg, mlm, 17));
}
