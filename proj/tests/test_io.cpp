#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "macrotensor/io.hpp"
#include "test_util.hpp"

using namespace macrotensor;
using namespace testutil;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    const fs::path p = fs::temp_directory_path() / "macrotensor_test_io";
    fs::create_directories(p);
    return p;
}

void write_file(const fs::path& p, const std::string& s) {
    std::ofstream(p) << s;
    fs::remove(p.string() + ".json");
}

std::size_t error_line(const std::string& path) {
    try {
        read_t3(path);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST_CASE("T3 round trip, plain and gzip") {
    Rng rng(1);
    const Tensor3 t = random_tensor(rng, Dims{4, 3, 5}, 0.2);
    for (bool gz : {false, true}) {
        const std::string p = (scratch() / (gz ? "t.t3.gz" : "t.t3")).string();
        write_t3(p, t, gz);
        const Tensor3 back = read_t3(p);
        CHECK(back == t);
        for (std::size_t off = 0; off < t.size(); ++off)
            if (t.observed_at(off)) REQUIRE(back.value_at(off) == t.value_at(off));
    }
}

TEST_CASE("dims from the sidecar or the maximal indices") {
    const fs::path p = scratch() / "sparse.t3";
    write_file(p, "i,j,k,value\n1,1,1,2.5\n2,3,1,NA\n");
    const Tensor3 a = read_t3(p.string());
    CHECK(a.dims() == Dims{2, 3, 1});
    CHECK(a(0, 0, 0) == 2.5);
    CHECK_FALSE(a.observed(1, 2, 0));
    CHECK_FALSE(a.observed(0, 1, 0));  // absent cells are missing
    std::ofstream(p.string() + ".json") << R"({"I":3,"J":3,"K":2})";
    CHECK(read_t3(p.string()).dims() == Dims{3, 3, 2});
}

TEST_CASE("parse errors carry line numbers") {
    const fs::path p = scratch() / "bad.t3";
    write_file(p, "i,j,k,value\n1,1,1,1\n1,2,1,2\n1,1,1,3\n");
    CHECK(error_line(p.string()) == 4);
    write_file(p, "i,j,k,value\n1,1,1,1\n1,x,1,2\n");
    CHECK(error_line(p.string()) == 3);
    write_file(p, "i,j,k,value\n1,1,1,abc\n");
    CHECK(error_line(p.string()) == 2);
    write_file(p, "a,b,c,d\n");
    CHECK(error_line(p.string()) == 1);
    write_file(p, "i,j,k,value\n1,1,1,1\n2,2,2,1\n");
    std::ofstream(p.string() + ".json") << R"({"I":1,"J":2,"K":2})";
    CHECK(error_line(p.string()) == 3);
    CHECK_THROWS(read_t3((scratch() / "nope.t3").string()));
}

TEST_CASE("matrix CSV") {
    const fs::path p = scratch() / "m.csv";
    Matrix m(2, 3);
    m << 1.5, -2, 1e-300, 0.1, 3, 4;
    Mask mask = Mask::Constant(2, 3, true);
    mask(1, 1) = false;
    write_matrix_csv(p.string(), m, mask);
    const Unfolded u = read_matrix_csv(p.string());
    CHECK(u.mask(1, 1) == false);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index c = 0; c < 3; ++c)
            if (mask(i, c)) CHECK(u.values(i, c) == m(i, c));
    write_file(p, "1,2\n3,,\n");
    CHECK_THROWS_AS(read_matrix_csv(p.string()), ParseError);
    write_file(p, "1,2\n3,\n");
    CHECK_FALSE(read_matrix_csv(p.string()).mask(1, 1));
}
