#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "phi2/config.hpp"
#include "phi2/io.hpp"
#include "phi2/rng.hpp"

using namespace phi2;

namespace {

std::shared_ptr<SpectralBasis> basis(int d, double L, int M) {
    return std::make_shared<SpectralBasis>(d, L, M);
}

SpectralField random_field(std::shared_ptr<const SpectralBasis> b, std::uint64_t seed) {
    RngStream rng(seed);
    SpectralField x(std::move(b));
    for (auto& c : x.coeffs()) c = rng.normal();
    return x;
}

} // namespace

TEST_CASE("binary field round trip") {
    for (int d : {1, 2, 3}) {
        auto b = basis(d, 1.0 + 0.5 * d, d == 3 ? 3 : 7);
        const SpectralField x = random_field(b, 5 + static_cast<std::uint64_t>(d));
        std::stringstream ss;
        write_field(ss, x);
        const SpectralField y = read_field(ss);
        CHECK(y.basis().dim() == d);
        CHECK(y.basis().modes_per_dim() == b->modes_per_dim());
        CHECK(y.basis().length() == b->length());
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]); // bit-exact
    }
}

TEST_CASE("field file header and error paths") {
    auto b = basis(1, M_PI, 4);
    const SpectralField x = random_field(b, 1);
    std::stringstream ss;
    write_field(ss, x);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 4) == "PHI2");
    CHECK(bytes.size() == 16 + 8 + 4 * 8);

    // wrong magic
    std::stringstream bad("XXXX" + bytes.substr(4));
    CHECK_THROWS_AS(read_field(bad), std::runtime_error);
    // truncation
    std::stringstream trunc(bytes.substr(0, bytes.size() - 4));
    CHECK_THROWS_AS(read_field(trunc), std::runtime_error);
    // basis mismatch
    std::stringstream again(bytes);
    CHECK_THROWS_AS(read_field(again, basis(1, M_PI, 8)), std::runtime_error);
    // matching caller-supplied basis is shared
    std::stringstream ok(bytes);
    const SpectralField y = read_field(ok, b);
    CHECK(&y.basis() == b.get());
    CHECK_THROWS_AS(read_field(std::string("/nonexistent/field.phi2")), std::runtime_error);
}

TEST_CASE("field files on disk") {
    const std::string path = "test_io_field.phi2";
    auto b = basis(2, 2.0, 5);
    const SpectralField x = random_field(b, 9);
    write_field(path, x);
    const SpectralField y = read_field(path);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
    std::remove(path.c_str());
}

TEST_CASE("trajectory container and CSV observables") {
    auto b = basis(1, M_PI, 4);
    Trajectory u;
    for (int j = 0; j <= 3; ++j) {
        u.times.push_back(0.1 * j);
        u.states.push_back(random_field(b, 20 + static_cast<std::uint64_t>(j)));
    }
    const std::string bpath = "test_io_traj.phi2";
    write_trajectory(bpath, u);
    {
        std::ifstream is(bpath, std::ios::binary);
        char magic[4];
        is.read(magic, 4);
        CHECK(std::string(magic, 4) == "PHI2");
    }
    std::remove(bpath.c_str());

    const std::string cpath = "test_io_traj.csv";
    write_trajectory_csv(cpath, u, 1.0, "config=abc seed=1 version=" + std::string(kCodeVersion));
    std::ifstream is(cpath);
    std::string line;
    std::getline(is, line);
    CHECK(line.rfind("# ", 0) == 0);
    CHECK(line.find("config=abc") != std::string::npos);
    std::getline(is, line);
    CHECK(line == "time,norm_H,norm_Hneg,max_abs");
    int rows = 0;
    double prev_t = -1.0;
    while (std::getline(is, line)) {
        std::istringstream row(line);
        double t, nh, nn, ma;
        char c;
        row >> t >> c >> nh >> c >> nn >> c >> ma;
        CHECK(t > prev_t);
        CHECK(nh >= 0.0);
        CHECK(nn <= nh + 1e-12); // alpha_k >= 1 on this basis
        CHECK(ma >= 0.0);
        prev_t = t;
        ++rows;
    }
    CHECK(rows == 4);
    std::remove(cpath.c_str());
}

TEST_CASE("config hash is stable and sensitive") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") != fnv1a("b"));
    const Config c1 = Config::parse_string("[run]\nseed = 1\n");
    const Config c2 = Config::parse_string("[run]\n  seed =  1   # comment\n");
    CHECK(fnv1a(c1.canonical_text()) == fnv1a(c2.canonical_text()));
    Config c3 = Config::parse_string("[run]\nseed = 1\n");
    c3.set("run.seed", "2");
    CHECK(fnv1a(c3.canonical_text()) != fnv1a(c1.canonical_text()));
}

TEST_CASE("config parsing") {
    const std::string text =
        "# top comment\n"
        "[model]\n"
        "d = 2\n"
        "lambda1 = 0.5   # inline comment\n"
        "name = \"phi four\"\n"
        "dealias = true\n"
        "\n"
        "[run]\n"
        "seed = 42\n"
        "eps = 1e-2\n";
    const Config cfg = Config::parse_string(text);
    CHECK(cfg.get_int("model.d") == 2);
    CHECK(cfg.get_double("model.lambda1") == 0.5);
    CHECK(cfg.get_string("model.name") == "phi four");
    CHECK(cfg.get_bool("model.dealias"));
    CHECK(cfg.get_int("run.seed") == 42);
    CHECK(cfg.get_double("run.eps") == 0.01);

    CHECK(cfg.has("model.d"));
    CHECK_FALSE(cfg.has("model.missing"));
    CHECK(cfg.get_double("model.missing", 7.5) == 7.5);
    CHECK(cfg.get_int("model.missing", 3) == 3);
    CHECK(cfg.get_bool("model.missing", false) == false);
    CHECK(cfg.get_string("model.missing", "x") == "x");

    CHECK_THROWS_AS(cfg.get_string("model.missing"), std::runtime_error);
    CHECK_THROWS_AS(cfg.get_int("model.lambda1"), std::runtime_error);
    CHECK_THROWS_AS(cfg.get_double("model.name"), std::runtime_error);
    CHECK_THROWS_AS(cfg.get_bool("model.name"), std::runtime_error);
    CHECK_THROWS_AS(Config::parse_string("[broken\nk = v\n"), std::runtime_error);
    CHECK_THROWS_AS(Config::parse_string("novalue\n"), std::runtime_error);
    CHECK_THROWS_AS(Config::parse_file("/nonexistent/cfg.toml"), std::runtime_error);
}
