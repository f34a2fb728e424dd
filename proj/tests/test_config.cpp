#include <mcaurora/config.hpp>

#include <doctest.h>

using namespace mcaurora;

namespace {

const char* minimal = R"(case: mini
seed: 3
task:
  name: walker
  params:
    episodes_per_eval: 1
containers:
  bin_budget: 200
  grids:
    - {shape: [10, 10], fd: hardcoded, pair: 0}
    - {shape: [10, 10], fd: hardcoded, pair: 1}
features:
  training: none
)";

int error_line(const std::string& text)
{
    try {
        parse_config(text);
    }
    catch (const ConfigError& e) {
        return e.line();
    }
    return -1;
}

std::string error_message(const std::string& text)
{
    try {
        parse_config(text);
    }
    catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("minimal config parses with defaults")
{
    const auto c = parse_config(minimal);
    CHECK(c.case_name == "mini");
    CHECK(c.seed == 3);
    CHECK(c.task_params.at("episodes_per_eval") == 1.0);
    REQUIRE(c.containers.size() == 2);
    CHECK(c.containers[1].hardcoded_pair == 1);
    CHECK(c.training == TrainingStrategy::None);
    CHECK(c.p_mut == 0.1);
    CHECK(c.eta == 20.0);
    CHECK(c.curiosity.failure == -0.5);
    const auto e = c.engine_config();
    CHECK(e.containers == c.containers);
    CHECK(e.training_cfg == c.optimiser);
}

TEST_CASE("every preset survives a dump and re-parse")
{
    REQUIRE(preset_names().size() == 15);
    for (const auto& name : preset_names())
        for (bool desk : {false, true}) {
            INFO(name << (desk ? " desk" : ""));
            const auto c = preset(name, desk);
            const auto text = dump_config(c);
            const auto back = parse_config(text);
            CHECK(back == c);
            CHECK(dump_config(back) == text);
            CHECK(config_hash(back) == config_hash(c));
        }
    CHECK_THROWS_AS(preset("qt-reco-7", false), ConfigError);
}

TEST_CASE("paper-scale presets fill their bin budgets")
{
    CHECK(preset("qt-reco-6-ns", false).bin_budget == 2500);
    CHECK(preset("qt-reco-9-ns", false).bin_budget == 2500);
    CHECK(preset("qt-reco-25-ns", false).bin_budget == 2500);
    CHECK(preset("hardcoded-1", false).bin_budget == 2500);
    CHECK(preset("qt-reco-4", true).bin_budget == 400);
    CHECK(preset("qt-covmax-4-ns", false).diversity.sign == -1);
    CHECK(preset("qt-covmin-4-ns", false).diversity.sign == 1);
    CHECK(preset("qt-outputs-4-ns", false).diversity.sign == -1);
    CHECK(preset("qt-cmd-4-ns", false).diversity.kind == DiversityKind::Cmd);
    CHECK(preset("pt-reco-4", false).training == TrainingStrategy::PreTrained);
    CHECK(preset("hardcoded-4-ns", true).sharing == SharingStrategy::NonShared);
}

TEST_CASE("unknown keys are reported with their line")
{
    std::string text = minimal;
    text += "  trainig_period: 5\n";
    CHECK(error_line(text) == 14);
    CHECK(error_message(text).find("trainig_period") != std::string::npos);
    CHECK(error_line(std::string(minimal) + "colour: blue\n") == 14);
}

TEST_CASE("bin budget mismatch is rejected")
{
    std::string text = minimal;
    text.replace(text.find("bin_budget: 200"), 15, "bin_budget: 250");
    const auto msg = error_message(text);
    CHECK(msg.find("bin_budget") != std::string::npos);
    CHECK(error_line(text) == 8);
}

TEST_CASE("semantic errors name the field")
{
    std::string text = minimal;
    text.replace(text.find("training: none"), 14, "training: online");
    CHECK(error_message(text).find("training") != std::string::npos);

    text = minimal;
    text.replace(text.find("fd: hardcoded, pair: 1"), 22, "fd: hardcoded, pair: 7");
    CHECK_THROWS_AS(parse_config(text), ConfigError);

    text = minimal;
    text.replace(text.find("seed: 3"), 7, "seed: many");
    CHECK(error_line(text) == 2);

    text = minimal;
    text.replace(text.find("[10, 10], fd: hardcoded, pair: 0"), 8, "[10, 10, 2]");
    CHECK_THROWS_AS(parse_config(text), ConfigError);

    CHECK_THROWS_AS(parse_config("case: x\ncontainers: [1, 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("seed: 1\n"), ConfigError);
}

TEST_CASE("range checks")
{
    auto c = parse_config(minimal);
    c.p_mut = 1.5;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = parse_config(minimal);
    c.diversity.sign = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = parse_config(minimal);
    c.batch_size = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = parse_config(minimal);
    c.replicates = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = parse_config(minimal);
    c.optimiser.validation_split = 1.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("config hash ignores output location and thread count only")
{
    auto a = preset("qt-reco-4", true);
    auto b = a;
    b.output_dir = "/elsewhere";
    b.threads = 8;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.seed = 7;
    CHECK(config_hash(a) != config_hash(b));
}
