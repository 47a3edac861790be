#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "oilml/dataset.hpp"
#include "oilml/errors.hpp"
#include "textio.hpp"

using namespace oilml;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("oilml_test_" + name);
}

Dataset two_oil_sample() {
    Dataset data;
    data.space = LabelSpace({"soybean", "sesame"});
    data.dim = 3;

    Example pure;
    pure.id = "s1";
    pure.features = {0.1, 0.2, 1.0 / 3.0};
    pure.labels = {0};
    pure.ratios = {{0, 1.0}};

    Example mix;
    mix.id = "m1";
    mix.features = {1e-12, -4.5, 123456.789};
    mix.labels = {0, 1};
    mix.ratios = {{0, 0.8}, {1, 0.2}};

    data.examples = {pure, mix};
    return data;
}

}  // namespace

TEST_CASE("label space rejects malformed names") {
    CHECK_THROWS_AS(LabelSpace(std::vector<std::string>{}), data_error);
    CHECK_THROWS_AS(LabelSpace({""}), data_error);
    CHECK_THROWS_AS(LabelSpace({"a", "a"}), data_error);
    CHECK_THROWS_AS(LabelSpace({"a,b"}), data_error);
    CHECK_THROWS_AS(LabelSpace({"a:b"}), data_error);
    CHECK_THROWS_AS(LabelSpace({"a|b"}), data_error);
    CHECK_THROWS_AS(LabelSpace({"a b"}), data_error);

    const LabelSpace space({"soybean", "sesame"});
    CHECK(space.size() == 2);
    CHECK(space.index_of("sesame") == 1);
    CHECK(space.index_of("palm") == -1);
}

TEST_CASE("csv round trip is bit-exact") {
    const Dataset data = two_oil_sample();
    const auto path = temp_file("roundtrip.csv");
    save_csv(data, path.string());

    const Dataset back = load_csv(path.string(), data.space);
    REQUIRE(back.size() == data.size());
    CHECK(back.dim == data.dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(back.examples[i].id == data.examples[i].id);
        CHECK(back.examples[i].labels == data.examples[i].labels);
        CHECK(back.examples[i].ratios == data.examples[i].ratios);
        REQUIRE(back.examples[i].features.size() == data.examples[i].features.size());
        for (std::size_t j = 0; j < data.dim; ++j) {
            CHECK(back.examples[i].features[j] == data.examples[i].features[j]);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("save_csv writes exactly to_csv_text") {
    const Dataset data = two_oil_sample();
    const auto path = temp_file("exact.csv");
    save_csv(data, path.string());
    CHECK(textio::read_file(path.string()) == to_csv_text(data));
    std::filesystem::remove(path);
}

TEST_CASE("load_csv parses labels, ratios and errors") {
    const LabelSpace space({"soybean", "sesame"});
    const auto path = temp_file("parse.csv");

    SUBCASE("single-label row with explicit ratio") {
        std::ofstream(path) << "id,labels,f0,f1\ns1,\"soybean:1.0\",0.1,0.2\n";
        const Dataset data = load_csv(path.string(), space);
        REQUIRE(data.size() == 1);
        CHECK(data.examples[0].labels == std::vector<int>{0});
        CHECK(data.examples[0].ratios.at(0) == 1.0);
        CHECK(data.dim == 2);
    }
    SUBCASE("single-label row without ratio") {
        std::ofstream(path) << "id,labels,f0,f1\ns1,soybean,0.1,0.2\n";
        const Dataset data = load_csv(path.string(), space);
        CHECK_FALSE(data.examples[0].has_ratios());
    }
    SUBCASE("two-label row") {
        std::ofstream(path) << "id,labels,f0,f1\nm1,\"soybean:0.8|sesame:0.2\",0.1,0.2\n";
        const Dataset data = load_csv(path.string(), space);
        CHECK(data.examples[0].labels == std::vector<int>{0, 1});
        CHECK(data.examples[0].ratios.at(0) == 0.8);
        CHECK(data.examples[0].ratios.at(1) == 0.2);
    }
    SUBCASE("ratio sum far from one is rejected with the row number") {
        std::ofstream(path) << "id,labels,f0,f1\nok,soybean,0,0\nm1,\"soybean:0.5|sesame:0.4\",0.1,0.2\n";
        try {
            load_csv(path.string(), space);
            FAIL("expected data_error");
        } catch (const data_error& e) {
            CHECK(std::string(e.what()).find("row 3") != std::string::npos);
        }
    }
    SUBCASE("unknown label name is rejected") {
        std::ofstream(path) << "id,labels,f0,f1\ns1,palm,0.1,0.2\n";
        CHECK_THROWS_AS(load_csv(path.string(), space), data_error);
    }
    SUBCASE("non-finite feature is rejected") {
        std::ofstream(path) << "id,labels,f0,f1\ns1,soybean,nan,0.2\n";
        CHECK_THROWS_AS(load_csv(path.string(), space), data_error);
    }
    SUBCASE("short row is rejected") {
        std::ofstream(path) << "id,labels,f0,f1\ns1,soybean,0.1\n";
        CHECK_THROWS_AS(load_csv(path.string(), space), data_error);
    }
    std::filesystem::remove(path);
}

TEST_CASE("infer_label_space keeps first-appearance order") {
    const auto path = temp_file("infer.csv");
    std::ofstream(path) << "id,labels,f0\n"
                           "a,\"sesame:0.6|palm:0.4\",0\n"
                           "b,soybean,0\n"
                           "c,palm,0\n";
    const LabelSpace space = infer_label_space(path.string());
    CHECK(space.names() == std::vector<std::string>{"sesame", "palm", "soybean"});
    std::filesystem::remove(path);
}

TEST_CASE("scale_to_unit maps endpoints and constants") {
    Dataset data;
    data.space = LabelSpace({"a"});
    data.dim = 2;
    for (double v : {0.0, 5.0, 10.0}) {
        Example ex;
        ex.id = "x" + std::to_string(static_cast<int>(v));
        ex.features = {v, 3.0};
        ex.labels = {0};
        data.examples.push_back(ex);
    }

    const Dataset scaled = scale_to_unit(data);
    CHECK(scaled.examples[0].features[0] == -1.0);
    CHECK(scaled.examples[1].features[0] == 0.0);
    CHECK(scaled.examples[2].features[0] == 1.0);
    for (const Example& ex : scaled.examples) CHECK(ex.features[1] == 0.0);

    REQUIRE(scaled.scaling.size() == 2);
    CHECK(scaled.scaling[0].min == 0.0);
    CHECK(scaled.scaling[0].max == 10.0);

    SUBCASE("test values outside the training range are not clamped") {
        Dataset test = data;
        test.examples[0].features = {20.0, 7.0};
        const Dataset applied = apply_scaling(test, scaled.scaling);
        CHECK(applied.examples[0].features[0] == 3.0);
    }
    SUBCASE("the stored ranges reproduce the training transform") {
        const Dataset redo = apply_scaling(data, scaled.scaling);
        for (std::size_t i = 0; i < scaled.size(); ++i) {
            for (std::size_t j = 0; j < scaled.dim; ++j) {
                CHECK(std::abs(redo.examples[i].features[j] - scaled.examples[i].features[j]) <=
                      1e-12);
            }
        }
    }
}

TEST_CASE("binary_view signs mixtures positive") {
    const Dataset data = two_oil_sample();
    const auto view = binary_view(data);
    REQUIRE(view.size() == data.size());
    CHECK(view[0].sign == -1);
    CHECK(view[1].sign == +1);
    CHECK(view[1].features.data() == data.examples[1].features.data());

    std::size_t pure = 0, mixed = 0;
    for (const auto& se : view) (se.sign > 0 ? mixed : pure)++;
    CHECK(pure + mixed == data.size());
}

TEST_CASE("validate names the offending example") {
    Dataset data = two_oil_sample();
    data.examples[1].ratios = {{0, 0.5}, {1, 0.4}};
    try {
        validate(data);
        FAIL("expected data_error");
    } catch (const data_error& e) {
        CHECK(std::string(e.what()).find("m1") != std::string::npos);
    }

    Dataset bad_dim = two_oil_sample();
    bad_dim.examples[0].features.pop_back();
    CHECK_THROWS_AS(validate(bad_dim), data_error);

    Dataset unsorted = two_oil_sample();
    unsorted.examples[1].labels = {1, 0};
    CHECK_THROWS_AS(validate(unsorted), data_error);
}
