#include "dimml/synthdata.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>

#include "dimml/errors.hpp"
#include "dimml/rng.hpp"

namespace dimml {

SyntheticRecipe complementary_recipe() {
    SyntheticRecipe r;
    r.num_classes = 6;
    r.num_modalities = 2;
    r.input_dims = {12, 12};
    // Modality 1 spreads its signal over six dims, modality 2 over two,
    // so the modalities differ in learnability the way natural pairs do.
    r.informative_dims = {{0, 1, 2, 3, 4, 5}, {0, 1}};
    r.shared_dims = {6, 7};
    r.carried_classes = {{0, 1, 2, 3}, {2, 3, 4, 5}};
    r.prototype_scale = 1.0;
    r.shared_scale = 0.25;
    r.noise_std = 0.4;
    r.corrupt_prob = {0.0, 0.0};
    r.train_samples = 240;
    r.test_samples = 120;
    return r;
}

SyntheticRecipe reliability_skewed_recipe() {
    SyntheticRecipe r = complementary_recipe();
    r.corrupt_prob = {0.5, 0.0};
    return r;
}

void validate_recipe(const SyntheticRecipe& r) {
    if (r.num_classes < 2) throw validation_error("recipe: num_classes must be >= 2");
    if (r.num_modalities < 2) throw validation_error("recipe: num_modalities must be >= 2");
    auto per_modality = [&](std::size_t n, const char* field) {
        if (static_cast<int>(n) != r.num_modalities) {
            throw validation_error(std::string("recipe: ") + field + " must list one entry per modality");
        }
    };
    per_modality(r.input_dims.size(), "input_dims");
    per_modality(r.informative_dims.size(), "informative_dims");
    per_modality(r.carried_classes.size(), "carried_classes");
    per_modality(r.corrupt_prob.size(), "corrupt_prob");
    for (int m = 0; m < r.num_modalities; ++m) {
        if (r.input_dims[m] < 1) throw validation_error("recipe: input_dims entries must be >= 1");
        std::set<int> seen;
        auto check_dim = [&](int d, const char* field) {
            if (d < 0 || d >= r.input_dims[m]) {
                throw validation_error(std::string("recipe: ") + field + " index out of range");
            }
            if (!seen.insert(d).second) {
                throw validation_error(std::string("recipe: ") + field +
                                       " overlaps another dimension set");
            }
        };
        for (int d : r.informative_dims[m]) check_dim(d, "informative_dims");
        for (int d : r.shared_dims) check_dim(d, "shared_dims");
        for (int k : r.carried_classes[m]) {
            if (k < 0 || k >= r.num_classes) {
                throw validation_error("recipe: carried_classes entry out of range");
            }
        }
        if (r.corrupt_prob[m] < 0.0 || r.corrupt_prob[m] > 1.0) {
            throw validation_error("recipe: corrupt_prob must lie in [0, 1]");
        }
    }
    if (r.noise_std < 0.0) throw validation_error("recipe: noise_std must be >= 0");
    if (r.shared_scale < 0.0) throw validation_error("recipe: shared_scale must be >= 0");
    if (r.train_samples < r.num_classes || r.test_samples < r.num_classes) {
        throw validation_error("recipe: each class needs at least one train and one test sample");
    }
}

nlohmann::json recipe_to_json(const SyntheticRecipe& r) {
    return nlohmann::json{{"num_classes", r.num_classes},
                          {"num_modalities", r.num_modalities},
                          {"input_dims", r.input_dims},
                          {"informative_dims", r.informative_dims},
                          {"shared_dims", r.shared_dims},
                          {"carried_classes", r.carried_classes},
                          {"prototype_scale", r.prototype_scale},
                          {"shared_scale", r.shared_scale},
                          {"noise_std", r.noise_std},
                          {"corrupt_prob", r.corrupt_prob},
                          {"train_samples", r.train_samples},
                          {"test_samples", r.test_samples},
                          {"seed", r.seed}};
}

SyntheticRecipe recipe_from_json(const nlohmann::json& j) {
    SyntheticRecipe r;
    try {
        j.at("num_classes").get_to(r.num_classes);
        j.at("num_modalities").get_to(r.num_modalities);
        j.at("input_dims").get_to(r.input_dims);
        j.at("informative_dims").get_to(r.informative_dims);
        j.at("shared_dims").get_to(r.shared_dims);
        j.at("carried_classes").get_to(r.carried_classes);
        j.at("prototype_scale").get_to(r.prototype_scale);
        j.at("shared_scale").get_to(r.shared_scale);
        j.at("noise_std").get_to(r.noise_std);
        j.at("corrupt_prob").get_to(r.corrupt_prob);
        j.at("train_samples").get_to(r.train_samples);
        j.at("test_samples").get_to(r.test_samples);
        j.at("seed").get_to(r.seed);
    } catch (const nlohmann::json::exception& e) {
        throw validation_error(std::string("recipe json: ") + e.what());
    }
    return r;
}

namespace {

enum class DimKind : unsigned char { noise, informative, shared };

struct ModalityLayout {
    std::vector<DimKind> kind;         // per input dimension
    std::vector<char> carried;         // per class
};

Dataset generate_split(const SyntheticRecipe& r, const std::vector<ModalityLayout>& layout,
                       const std::vector<std::vector<std::vector<double>>>& proto,
                       const std::vector<std::vector<double>>& shared_proto, int n,
                       std::uint64_t stream) {
    Dataset ds;
    ds.labels.resize(static_cast<std::size_t>(n));
    for (int m = 0; m < r.num_modalities; ++m) {
        ds.inputs.push_back(Tensor::zeros({n, r.input_dims[m]}));
    }
    Rng rng(mix_seed(r.seed, stream));
    for (int j = 0; j < n; ++j) {
        int k = j % r.num_classes;
        ds.labels[static_cast<std::size_t>(j)] = k;
        for (int m = 0; m < r.num_modalities; ++m) {
            bool corrupted = rng.uniform() < r.corrupt_prob[static_cast<std::size_t>(m)];
            Tensor& x = ds.inputs[static_cast<std::size_t>(m)];
            for (int d = 0; d < r.input_dims[m]; ++d) {
                double base = 0.0;
                if (!corrupted) {
                    switch (layout[static_cast<std::size_t>(m)].kind[static_cast<std::size_t>(d)]) {
                        case DimKind::informative:
                            if (layout[static_cast<std::size_t>(m)].carried[static_cast<std::size_t>(k)]) {
                                base = proto[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)]
                                            [static_cast<std::size_t>(d)] *
                                       r.prototype_scale;
                            }
                            break;
                        case DimKind::shared:
                            base = shared_proto[static_cast<std::size_t>(k)]
                                               [static_cast<std::size_t>(d)] *
                                   r.shared_scale;
                            break;
                        case DimKind::noise:
                            break;
                    }
                }
                x.at(j, d) = base + rng.normal() * r.noise_std;
            }
        }
    }
    return ds;
}

}  // namespace

std::pair<Dataset, Dataset> generate(const SyntheticRecipe& r) {
    validate_recipe(r);

    std::vector<ModalityLayout> layout(static_cast<std::size_t>(r.num_modalities));
    for (int m = 0; m < r.num_modalities; ++m) {
        ModalityLayout& lo = layout[static_cast<std::size_t>(m)];
        lo.kind.assign(static_cast<std::size_t>(r.input_dims[m]), DimKind::noise);
        for (int d : r.informative_dims[m]) lo.kind[static_cast<std::size_t>(d)] = DimKind::informative;
        for (int d : r.shared_dims) lo.kind[static_cast<std::size_t>(d)] = DimKind::shared;
        lo.carried.assign(static_cast<std::size_t>(r.num_classes), 0);
        for (int k : r.carried_classes[m]) lo.carried[static_cast<std::size_t>(k)] = 1;
    }

    // Prototypes use their own stream so sample draws never shift them.
    Rng proto_rng(mix_seed(r.seed, 1));
    std::vector<std::vector<std::vector<double>>> proto(static_cast<std::size_t>(r.num_modalities));
    for (int m = 0; m < r.num_modalities; ++m) {
        proto[static_cast<std::size_t>(m)].assign(
            static_cast<std::size_t>(r.num_classes),
            std::vector<double>(static_cast<std::size_t>(r.input_dims[m]), 0.0));
        for (int k = 0; k < r.num_classes; ++k) {
            for (int d = 0; d < r.input_dims[m]; ++d) {
                if (layout[static_cast<std::size_t>(m)].kind[static_cast<std::size_t>(d)] ==
                    DimKind::informative) {
                    proto[static_cast<std::size_t>(m)][static_cast<std::size_t>(k)]
                         [static_cast<std::size_t>(d)] = proto_rng.normal();
                }
            }
        }
    }
    int max_dim = *std::max_element(r.input_dims.begin(), r.input_dims.end());
    std::vector<std::vector<double>> shared_proto(
        static_cast<std::size_t>(r.num_classes),
        std::vector<double>(static_cast<std::size_t>(max_dim), 0.0));
    for (int k = 0; k < r.num_classes; ++k) {
        for (int d : r.shared_dims) {
            shared_proto[static_cast<std::size_t>(k)][static_cast<std::size_t>(d)] =
                proto_rng.normal();
        }
    }

    Dataset train = generate_split(r, layout, proto, shared_proto, r.train_samples, 2);
    Dataset test = generate_split(r, layout, proto, shared_proto, r.test_samples, 3);
    return {std::move(train), std::move(test)};
}

std::vector<MultimodalBatch> iterate_batches(const Dataset& ds, int batch_size,
                                             std::uint64_t shuffle_seed) {
    if (ds.size() == 0) throw validation_error("iterate_batches: dataset is empty");
    if (batch_size < 1) throw validation_error("iterate_batches: batch_size must be >= 1");
    std::vector<int> order(static_cast<std::size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(shuffle_seed);
    rng.shuffle(order);

    std::vector<MultimodalBatch> out;
    for (int start = 0; start < ds.size(); start += batch_size) {
        int b = std::min(batch_size, ds.size() - start);
        MultimodalBatch batch;
        batch.labels.resize(static_cast<std::size_t>(b));
        for (int m = 0; m < ds.num_modalities(); ++m) {
            const Tensor& src = ds.inputs[static_cast<std::size_t>(m)];
            Tensor x = Tensor::zeros({b, src.cols()});
            for (int j = 0; j < b; ++j) {
                int row = order[static_cast<std::size_t>(start + j)];
                for (int c = 0; c < src.cols(); ++c) x.at(j, c) = src.at(row, c);
            }
            batch.inputs.push_back(std::move(x));
        }
        for (int j = 0; j < b; ++j) {
            batch.labels[static_cast<std::size_t>(j)] =
                ds.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(start + j)])];
        }
        out.push_back(std::move(batch));
    }
    return out;
}

namespace {

constexpr char kDatasetMagic[8] = {'D', 'M', 'L', 'D', 'A', 'T', 'A', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

void write_split(std::ostream& os, const Dataset& ds) {
    for (const Tensor& x : ds.inputs) {
        os.write(reinterpret_cast<const char*>(x.data().data()),
                 static_cast<std::streamsize>(x.numel() * sizeof(double)));
    }
    std::vector<std::int32_t> labels(ds.labels.begin(), ds.labels.end());
    os.write(reinterpret_cast<const char*>(labels.data()),
             static_cast<std::streamsize>(labels.size() * sizeof(std::int32_t)));
}

Dataset read_split(std::istream& is, const std::vector<int>& input_dims, int n) {
    Dataset ds;
    for (int d : input_dims) {
        Tensor x = Tensor::zeros({n, d});
        is.read(reinterpret_cast<char*>(x.data().data()),
                static_cast<std::streamsize>(x.numel() * sizeof(double)));
        ds.inputs.push_back(std::move(x));
    }
    std::vector<std::int32_t> labels(static_cast<std::size_t>(n));
    is.read(reinterpret_cast<char*>(labels.data()),
            static_cast<std::streamsize>(labels.size() * sizeof(std::int32_t)));
    ds.labels.assign(labels.begin(), labels.end());
    return ds;
}

}  // namespace

void save_dataset(const std::string& path, const SyntheticRecipe& recipe, const Dataset& train,
                  const Dataset& test) {
    nlohmann::json header{{"format", 1},
                          {"recipe", recipe_to_json(recipe)},
                          {"input_dims", recipe.input_dims},
                          {"train_samples", train.size()},
                          {"test_samples", test.size()}};
    std::string header_bytes = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("save_dataset: cannot open " + path);
    os.write(kDatasetMagic, 8);
    write_u64(os, header_bytes.size());
    os.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    write_split(os, train);
    write_split(os, test);
    if (!os) throw io_error("save_dataset: write failed for " + path);
}

StoredDataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("load_dataset: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kDatasetMagic, 8) != 0) {
        throw io_error("load_dataset: " + path + " is not a dataset container");
    }
    std::uint64_t header_len = read_u64(is);
    std::string header_bytes(header_len, '\0');
    is.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
    nlohmann::json header = nlohmann::json::parse(header_bytes, nullptr, false);
    if (header.is_discarded()) throw io_error("load_dataset: corrupt header in " + path);

    StoredDataset out;
    out.recipe = recipe_from_json(header.at("recipe"));
    std::vector<int> input_dims = header.at("input_dims").get<std::vector<int>>();
    int n_train = header.at("train_samples").get<int>();
    int n_test = header.at("test_samples").get<int>();
    out.train = read_split(is, input_dims, n_train);
    out.test = read_split(is, input_dims, n_test);
    if (!is) throw io_error("load_dataset: truncated container " + path);
    return out;
}

void export_csv(const Dataset& ds, const std::string& prefix) {
    for (int m = 0; m < ds.num_modalities(); ++m) {
        std::string path = prefix + "modality_" + std::to_string(m + 1) + ".csv";
        std::ofstream os(path);
        if (!os) throw io_error("export_csv: cannot open " + path);
        const Tensor& x = ds.inputs[static_cast<std::size_t>(m)];
        for (int c = 0; c < x.cols(); ++c) os << "dim_" << c << ",";
        os << "label\n";
        char buf[40];
        for (int r = 0; r < x.rows(); ++r) {
            for (int c = 0; c < x.cols(); ++c) {
                std::snprintf(buf, sizeof(buf), "%.17g", x.at(r, c));
                os << buf << ",";
            }
            os << ds.labels[static_cast<std::size_t>(r)] << "\n";
        }
        if (!os) throw io_error("export_csv: write failed for " + path);
    }
}

}  // namespace dimml
