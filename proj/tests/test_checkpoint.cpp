#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dimml/checkpoint.hpp"
#include "dimml/config.hpp"
#include "dimml/errors.hpp"

using namespace dimml;

namespace {

ModelState demo_model() {
    ModelConfig cfg;
    cfg.num_modalities = 2;
    cfg.num_classes = 4;
    cfg.input_dims = {10, 7};
    cfg.hidden_dims = {12, 9};
    cfg.feature_dim = 5;
    cfg.seed = 99;
    ModelState m = init_model(cfg);
    m.phase = "separated";
    m.effective_dims = {{0, 2, 4}, {1, 3}};
    return m;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::stringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("checkpoint round-trip is bitwise lossless") {
    const std::string path = "tmp_ckpt_roundtrip.bin";
    ModelState m = demo_model();
    nlohmann::json echo = config_to_json(default_config());
    save_checkpoint(path, m, echo);
    Checkpoint loaded = load_checkpoint(path);

    CHECK(loaded.model.num_modalities == m.num_modalities);
    CHECK(loaded.model.num_classes == m.num_classes);
    CHECK(loaded.model.feature_dim == m.feature_dim);
    CHECK(loaded.model.phase == "separated");
    CHECK(loaded.model.effective_dims == m.effective_dims);
    CHECK(loaded.config_echo.dump() == echo.dump());

    std::map<std::string, Tensor> want, got;
    for_each_param(m, [&](const std::string& n, const Tensor& t) { want[n] = t; });
    for_each_param(loaded.model,
                   [&](const std::string& n, const Tensor& t) { got[n] = t; });
    REQUIRE(want.size() == got.size());
    for (const auto& [name, tensor] : want) {
        CAPTURE(name);
        const Tensor& other = got.at(name);
        REQUIRE(tensor.same_shape(other));
        for (std::size_t i = 0; i < tensor.numel(); ++i) {
            if (tensor[i] != other[i]) {
                FAIL_CHECK("byte drift in " << name << " at " << i);
                break;
            }
        }
    }

    SUBCASE("save-load-save reproduces the file byte for byte") {
        const std::string second = "tmp_ckpt_roundtrip2.bin";
        save_checkpoint(second, loaded.model, loaded.config_echo);
        CHECK(slurp(path) == slurp(second));
        std::remove(second.c_str());
    }
    std::remove(path.c_str());
}

TEST_CASE("the manifest tensor directory tiles the blob exactly") {
    const std::string path = "tmp_ckpt_manifest.bin";
    ModelState m = demo_model();
    save_checkpoint(path, m, nlohmann::json::object());

    std::string bytes = slurp(path);
    REQUIRE(bytes.size() > 16);
    CHECK(bytes.compare(0, 8, "DMLCKPT1") == 0);
    std::uint64_t manifest_len = 0;
    for (int i = 0; i < 8; ++i) {
        manifest_len |= static_cast<std::uint64_t>(
                            static_cast<unsigned char>(bytes[8 + static_cast<std::size_t>(i)]))
                        << (8 * i);
    }
    nlohmann::json manifest = nlohmann::json::parse(bytes.substr(16, manifest_len));
    std::uint64_t blob_bytes = bytes.size() - 16 - manifest_len;
    CHECK(manifest.at("blob_bytes").get<std::uint64_t>() == blob_bytes);

    std::uint64_t cursor = 0;
    std::size_t counted = 0;
    for (const auto& entry : manifest.at("tensors")) {
        CHECK(entry.at("offset").get<std::uint64_t>() == cursor);
        std::uint64_t len = entry.at("byte_length").get<std::uint64_t>();
        std::uint64_t numel = 1;
        for (int d : entry.at("shape").get<std::vector<int>>()) {
            numel *= static_cast<std::uint64_t>(d);
        }
        CHECK(len == numel * 8);
        cursor += len;
        ++counted;
    }
    CHECK(cursor == blob_bytes);
    // 2 encoders x 3 layers x (W,b) + 2 uni heads x (W,b) + shared + fusion
    CHECK(counted == 2 * 3 * 2 + 2 * 2 + 2 + 2);
    std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are io errors") {
    CHECK_THROWS_AS(load_checkpoint("no_such_checkpoint.bin"), io_error);

    const std::string path = "tmp_ckpt_bad.bin";
    SUBCASE("wrong magic") {
        std::ofstream os(path, std::ios::binary);
        os << "NOTACKPTxxxxxxxxxxxxxxxx";
        os.close();
        CHECK_THROWS_AS(load_checkpoint(path), io_error);
    }
    SUBCASE("truncated blob") {
        save_checkpoint(path, demo_model(), nlohmann::json::object());
        std::string bytes = slurp(path);
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
        os.close();
        CHECK_THROWS_AS(load_checkpoint(path), io_error);
    }
    SUBCASE("trailing garbage") {
        save_checkpoint(path, demo_model(), nlohmann::json::object());
        std::ofstream os(path, std::ios::binary | std::ios::app);
        os << "extra";
        os.close();
        CHECK_THROWS_AS(load_checkpoint(path), io_error);
    }
    std::remove(path.c_str());
}
