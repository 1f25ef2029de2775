#include <doctest.h>

#include <cmath>
#include <limits>

#include "mpda/config.hpp"
#include "mpda/experiment.hpp"
#include "mpda/synthetic.hpp"

using namespace mpda;

namespace {

std::string error_of(auto fn)
{
    try {
        fn();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("key-value parsing")
{
    const KeyValues kv = KeyValues::parse("# header\n\nseed = 7  # trailing\n  name=  a b \nflag = yes\nr = [0.3, 0.35]\n",
                                          "run.cfg");
    CHECK(kv.u64("seed", 0) == 7);
    CHECK(kv.str("name", "") == "a b");
    CHECK(kv.boolean("flag", false));
    CHECK(kv.range("r")->first == doctest::Approx(0.3));
    CHECK(kv.range("r")->second == doctest::Approx(0.35));
    CHECK(kv.real("missing", 2.5) == 2.5);
    CHECK_FALSE(kv.range("missing"));

    const std::string dup = error_of([] { KeyValues::parse("a = 1\na = 2\n", "dup.cfg"); });
    CHECK(dup.find("dup.cfg:2") != std::string::npos);
    CHECK(error_of([] { KeyValues::parse("just words\n", "x.cfg"); }).find("x.cfg:1") != std::string::npos);

    const std::string bad = error_of([&] { KeyValues::parse("\nseed = seven\n", "s.cfg").u64("seed", 0); });
    CHECK(bad.find("s.cfg:2") != std::string::npos);
    CHECK(bad.find("seed") != std::string::npos);

    CHECK_THROWS_AS(KeyValues::parse("n = -3\n", "n").u64("n", 0), ConfigError);
    CHECK_THROWS_AS(KeyValues::parse("b = maybe\n", "b").boolean("b", false), ConfigError);
    CHECK_THROWS_AS(KeyValues::load("/nonexistent/dir/x.cfg"), ConfigError);
}

TEST_CASE("unknown keys are rejected and merge overrides")
{
    KeyValues kv = KeyValues::parse("a = 1\nzzz = 2\n", "k.cfg");
    const std::string e = error_of([&] { kv.require_known({"a"}); });
    CHECK(e.find("zzz") != std::string::npos);
    CHECK(e.find("unknown key") != std::string::npos);

    KeyValues over = KeyValues::parse("a = 5\nb = 6\n", "o");
    kv.merge(over);
    CHECK(kv.integer("a", 0) == 5);
    CHECK(kv.integer("b", 0) == 6);
    CHECK(kv.serialize() == "a = 5\nb = 6\nzzz = 2\n");
}

TEST_CASE("range parsing")
{
    CHECK(parse_range("0.3,0.35") == std::pair<double, double>{0.3, 0.35});
    CHECK(parse_range(" [ 0.1 , 0.2 ] ") == std::pair<double, double>{0.1, 0.2});
    CHECK_THROWS_AS(parse_range("0.3"), ConfigError);
    CHECK_THROWS_AS(parse_range("a,b"), ConfigError);
    CHECK_THROWS_AS(parse_range("0.5,0.1"), ConfigError);
    CHECK_THROWS_AS(parse_range("0.1x,0.2"), ConfigError);
}

TEST_CASE("format_real round-trips")
{
    for (double v : {0.0, 1e-3, 3e-6, 0.1, 1.0 / 3, 123456.789, -2.5e-17, 0.32})
        CHECK(std::stod(format_real(v)) == v);
    CHECK(format_real(0.001) == "0.001");
    CHECK(format_real(1.0) == "1");
}

TEST_CASE("run config defaults and round trip")
{
    const RunConfig d = RunConfig::from_config(KeyValues{});
    CHECK(d.lr.encoder == 1e-3);
    CHECK(d.lr.task1 == 3e-6);
    CHECK(d.lr.task2 == 3e-6);
    CHECK(d.lr.domain == 1e-5);
    CHECK(d.lambda == 1.0);
    CHECK(d.pretrain_epochs + d.adapt_epochs + d.decision_epochs == 71);
    CHECK(d.aug.copies == 10);
    CHECK(d.head == DomainHead::deep);
    CHECK(d.metric == DiscrepancyMetric::symmetric_bce);
    CHECK(d.target_denoise.kind == DenoiseMethod::Kind::median3);

    KeyValues kv = KeyValues::parse("seed = 5\nlr.domain = 1e-3\ndecision.lr.task1 = 1e-4\naug.zoom_range = 0.3,0.35\n"
                                    "domain_head = shallow\ndiscrepancy = l1\nconvergence = true\n",
                                    "r.cfg");
    const RunConfig c = RunConfig::from_config(kv);
    CHECK(c.seed == 5);
    CHECK(c.lr.domain == 1e-3);
    REQUIRE(c.phase_lr[static_cast<int>(Phase::decision_align)]);
    CHECK(c.phase(Phase::decision_align).lr.task1 == 1e-4);
    CHECK(c.phase(Phase::decision_align).lr.domain == 1e-3);
    CHECK(c.phase(Phase::pretrain).lr.task1 == 3e-6);
    CHECK(c.aug.effective_zoom_range() == std::pair<double, double>{0.3, 0.35});
    CHECK(c.convergence.has_value());

    const RunConfig again = RunConfig::from_config(c.to_config());
    CHECK(again.to_config().serialize() == c.to_config().serialize());
    CHECK(again.digest() == c.digest());
    CHECK(c.digest() != d.digest());
    CHECK(c.digest().size() == 16);
}

TEST_CASE("run config errors name the field")
{
    auto fails_on = [](const std::string& text, const std::string& field) {
        const std::string e = error_of([&] { RunConfig::from_config(KeyValues::parse(text, "bad.cfg")); });
        INFO(text << " -> " << e);
        CHECK(e.find(field) != std::string::npos);
    };
    fails_on("lr.encoder = 0\n", "lr.encoder");
    fails_on("lambda = -1\n", "lambda");
    fails_on("batch_size = 1\n", "batch_size");
    fails_on("domain_head = wide\n", "domain_head");
    fails_on("discrepancy = kl\n", "discrepancy");
    fails_on("aug.zoom_range = 0.3\n", "aug.zoom_range");
    fails_on("aug.copies = 0\n", "aug.copies");
    fails_on("denoise.target = gauss\n", "denoise.target");
    fails_on("learning_rate = 1\n", "learning_rate");
    fails_on("adapt.lr.domain = -1\n", "adapt.lr.domain");
}

TEST_CASE("phase config validation")
{
    PhaseConfig p;
    CHECK_NOTHROW(p.validate());
    p.batch_size = 1;
    CHECK_THROWS_AS(p.validate(), ContractError);
    p = {};
    p.lr.encoder = 0;
    CHECK_THROWS_AS(p.validate(), ContractError);
    p = {};
    p.lambda = -0.5;
    CHECK_THROWS_AS(p.validate(), ContractError);
    p = {};
    p.epochs = 0;
    CHECK_THROWS_AS(p.validate(), ContractError);
    p.phase = Phase::finetune;
    CHECK_NOTHROW(p.validate());
    CHECK(parse_phase(phase_name(Phase::domain_align)) == Phase::domain_align);
    CHECK(std::string(phase_name(Phase::decision_align)) == "decision-align");
}

TEST_CASE("synthetic spec config round trip")
{
    const KeyValues kv = KeyValues::parse("source.pixel_size = 8\ntarget.diameter_mean = 9.5\ntarget.seed = 3\n", "s");
    const SyntheticBenchmarkSpec s = SyntheticBenchmarkSpec::from_config(kv);
    CHECK(s.source.pixel_size == 8.0);
    CHECK(s.target.diameter_mean == 9.5);
    CHECK(s.target.seed == 3);
    CHECK(s.target.pixel_size == 25.0);
    const SyntheticBenchmarkSpec back = SyntheticBenchmarkSpec::from_config(s.to_config());
    CHECK(back.to_config().serialize() == s.to_config().serialize());
    CHECK_THROWS_AS(SyntheticBenchmarkSpec::from_config(KeyValues::parse("source.colour = 1\n", "s")), ConfigError);
    CHECK_THROWS_AS(SyntheticBenchmarkSpec::from_config(KeyValues::parse("target.noise_sigma = -1\n", "s")),
                    ConfigError);
}
