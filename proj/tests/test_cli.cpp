#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vdsh/cli.hpp"
#include "vdsh/codes.hpp"
#include "vdsh/network.hpp"

using namespace vdsh;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / "vdsh_cli_test") {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

int run_binary(const std::string& args) {
    const std::string cmd = std::string(VDSH_CLI_BINARY) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    f << text;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// 20 samples, 3 features, 2 one-hot label columns
std::string fixture_csv(const TempDir& dir) {
    std::ostringstream csv;
    Rng rng(19);
    for (int i = 0; i < 20; ++i) {
        const int cls = i % 2;
        for (int r = 0; r < 3; ++r) {
            csv << (0.2 + rng.next_double() + (r == cls ? 1.0 : 0.0)) << ',';
        }
        csv << (cls == 0 ? "1,0" : "0,1") << '\n';
    }
    const std::string p = dir.file("fixture.csv");
    write_file(p, csv.str());
    return p;
}

cli::RunConfig train_config(const TempDir& dir, const std::string& csv) {
    cli::RunConfig cfg;
    cfg.data_csv = csv;
    cfg.label_columns = 2;
    cfg.dims = {4, 4};
    cfg.hyper.max_iterations = 5;
    cfg.hyper.convergence_rel_tol = 0.0;
    cfg.seed = 11;
    cfg.out_weights = dir.file("w.bin");
    cfg.out_diagnostics = dir.file("d.csv");
    return cfg;
}

}  // namespace

TEST_CASE("train writes a weight file that loads back with matching dims") {
    TempDir dir;
    const auto csv = fixture_csv(dir);
    cli::RunConfig cfg = train_config(dir, csv);
    cli::run_train(cfg);

    const LoadedModel model = load_weights(cfg.out_weights);
    CHECK(model.weights.config.input_dim == 3);
    CHECK(model.weights.config.hidden_dims == std::vector<std::size_t>{4, 4});
    CHECK(model.weights.config.num_classes == 2);
    REQUIRE(model.classifier.has_value());
    CHECK(model.classifier->rows() == 4);
    CHECK(model.classifier->cols() == 2);

    const std::string diag = read_file(cfg.out_diagnostics);
    CHECK(diag.rfind("iter,layer,mean_beta_u_norm,mean_gamma_v_norm,objective_eq4,"
                     "aug_lagrangian,wall_ms\n", 0) == 0);
    // 5 iterations x (2 layer rows + 1 aggregate row) + header
    CHECK(std::count(diag.begin(), diag.end(), '\n') == 1 + 5 * 3);
}

TEST_CASE("train with zero iterations persists the random init") {
    TempDir dir;
    const auto csv = fixture_csv(dir);
    cli::RunConfig cfg = train_config(dir, csv);
    cfg.hyper.max_iterations = 0;
    cli::run_train(cfg);

    const LoadedModel model = load_weights(cfg.out_weights);
    const LabeledDataset ds = cli::load_dataset(cfg);
    NetworkConfig net;
    net.input_dim = 3;
    net.hidden_dims = {4, 4};
    net.num_classes = 2;
    Rng rng(cfg.seed);
    TrainerState ref = init_state(ds, net, cfg.hyper, rng);
    CHECK(model.weights.layer(1) == ref.weights.layer(1));
    CHECK(model.weights.layer(2) == ref.weights.layer(2));
    CHECK(*model.classifier == ref.classifier);
}

TEST_CASE("missing dataset exits 2 and leaves no output files") {
    TempDir dir;
    const std::string out = dir.file("never.bin");
    const int code = run_binary("train --data-csv " + dir.file("absent.csv") +
                                " --dims 4 --out-weights " + out);
    CHECK(code == 2);
    CHECK_FALSE(fs::exists(out));
    CHECK_FALSE(fs::exists(out + ".tmp"));
}

TEST_CASE("usage errors exit 2") {
    CHECK(run_binary("train --dims 4 --out-weights /tmp/x.bin") == 2);  // no dataset
    CHECK(run_binary("nonsense") == 2);
    CHECK(run_binary("train --no-such-flag") == 2);
}

TEST_CASE("encoded file round-trips and matches the in-memory encoding") {
    TempDir dir;
    const auto csv = fixture_csv(dir);
    cli::RunConfig cfg = train_config(dir, csv);
    cli::run_train(cfg);

    cli::RunConfig enc = cfg;
    enc.weights_path = cfg.out_weights;
    enc.out_codes = dir.file("codes.bin");
    cli::run_encode(enc);

    const HashCodeMatrix loaded = load_codes(enc.out_codes);
    const LoadedModel model = load_weights(cfg.out_weights);
    const LabeledDataset ds = cli::load_dataset(cfg);
    const HashCodeMatrix expect = encode_all(ds.x, model.weights);
    CHECK(loaded == expect);
    CHECK(loaded.count() == 20);
    CHECK(loaded.bits() == 4);
}

TEST_CASE("zero-weight model encodes every bit as -1") {
    TempDir dir;
    const auto csv = fixture_csv(dir);
    NetworkWeights zero;
    zero.config.input_dim = 3;
    zero.config.hidden_dims = {4};
    zero.config.num_classes = 2;
    zero.layers.push_back(Matrix(4, 3));
    save_weights(zero, dir.file("zero.bin"));

    cli::RunConfig enc;
    enc.data_csv = csv;
    enc.label_columns = 2;
    enc.weights_path = dir.file("zero.bin");
    enc.out_codes = dir.file("zero_codes.bin");
    cli::run_encode(enc);
    const HashCodeMatrix codes = load_codes(enc.out_codes);
    for (std::size_t i = 0; i < codes.count(); ++i) {
        for (std::size_t k = 0; k < codes.bits(); ++k) CHECK(codes.get(i, k) == -1);
    }
}

TEST_CASE("code file size follows the packed format arithmetic") {
    TempDir dir;
    std::ostringstream csv;
    for (int i = 0; i < 5; ++i) csv << "1,2,3," << (i % 2) << ',' << (1 - i % 2) << '\n';
    write_file(dir.file("five.csv"), csv.str());

    Rng rng(1);
    NetworkWeights w;
    w.config.input_dim = 3;
    w.config.hidden_dims = {16};
    w.config.num_classes = 2;
    w.layers.push_back(random_matrix(rng, 16, 3, 1.0));
    save_weights(w, dir.file("w16.bin"));

    cli::RunConfig enc;
    enc.data_csv = dir.file("five.csv");
    enc.label_columns = 2;
    enc.weights_path = dir.file("w16.bin");
    enc.out_codes = dir.file("c16.bin");
    cli::run_encode(enc);
    // header: magic(4) + version(4) + K(4) + N(8); 5 codes of one u64 word
    CHECK(fs::file_size(enc.out_codes) == 20 + 5 * 8);
}

TEST_CASE("encode rejects mismatched weight and data dims") {
    TempDir dir;
    const auto csv = fixture_csv(dir);  // 3 features
    Rng rng(2);
    NetworkWeights w;
    w.config.input_dim = 7;
    w.config.hidden_dims = {4};
    w.config.num_classes = 2;
    w.layers.push_back(random_matrix(rng, 4, 7, 1.0));
    save_weights(w, dir.file("w7.bin"));
    const int code = run_binary("encode --weights " + dir.file("w7.bin") + " --data-csv " + csv +
                                " --label-columns 2 --out " + dir.file("c.bin"));
    CHECK(code == 2);
    CHECK_FALSE(fs::exists(dir.file("c.bin")));
}

TEST_CASE("eval on a perfect single-match fixture yields MAP 1") {
    TempDir dir;
    HashCodeMatrix codes(8);
    std::vector<std::int8_t> a(8, 1), b(8, -1);
    codes.append(a);
    codes.append(b);
    save_codes(codes, dir.file("q.bin"));
    save_codes(codes, dir.file("db.bin"));
    write_file(dir.file("labels.csv"), "1,0\n0,1\n");

    cli::RunConfig ev;
    ev.query_codes = dir.file("q.bin");
    ev.db_codes = dir.file("db.bin");
    ev.query_labels = dir.file("labels.csv");
    ev.db_labels = dir.file("labels.csv");
    ev.mode = "single";
    ev.out_csv = dir.file("report.csv");
    const EvalReport rep = cli::run_eval(ev);
    CHECK(rep.map == doctest::Approx(1.0).epsilon(1e-15));

    const std::string csv = read_file(dir.file("report.csv"));
    CHECK(csv.rfind("map,precision_r0", 0) == 0);
    CHECK(csv.find("\n1,") != std::string::npos);
}

TEST_CASE("eval reproduces the worked radius-2 fixture") {
    TempDir dir;
    // database at distances 0,1,3,2 from the all-ones query
    HashCodeMatrix db(4);
    db.append(std::vector<std::int8_t>{1, 1, 1, 1});
    db.append(std::vector<std::int8_t>{1, 1, 1, -1});
    db.append(std::vector<std::int8_t>{1, -1, -1, -1});
    db.append(std::vector<std::int8_t>{1, -1, -1, 1});
    HashCodeMatrix q(4);
    q.append(std::vector<std::int8_t>{1, 1, 1, 1});
    save_codes(q, dir.file("q.bin"));
    save_codes(db, dir.file("db.bin"));
    write_file(dir.file("ql.csv"), "1,0\n");
    write_file(dir.file("dl.csv"), "1,0\n0,1\n1,0\n1,0\n");

    cli::RunConfig ev;
    ev.query_codes = dir.file("q.bin");
    ev.db_codes = dir.file("db.bin");
    ev.query_labels = dir.file("ql.csv");
    ev.db_labels = dir.file("dl.csv");
    const EvalReport rep = cli::run_eval(ev);
    CHECK(rep.precision_at_radius[2] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("multi-label eval counts any shared label as relevant") {
    TempDir dir;
    HashCodeMatrix codes(4);
    codes.append(std::vector<std::int8_t>{1, 1, 1, 1});
    save_codes(codes, dir.file("q.bin"));
    HashCodeMatrix db(4);
    db.append(std::vector<std::int8_t>{1, 1, 1, 1});
    db.append(std::vector<std::int8_t>{1, 1, 1, 1});
    save_codes(db, dir.file("db.bin"));
    write_file(dir.file("ql.csv"), "1,1,0\n");
    write_file(dir.file("dl.csv"), "0,1,1\n0,0,1\n");  // first shares label 1, second none

    cli::RunConfig ev;
    ev.query_codes = dir.file("q.bin");
    ev.db_codes = dir.file("db.bin");
    ev.query_labels = dir.file("ql.csv");
    ev.db_labels = dir.file("dl.csv");
    ev.mode = "multi";
    const EvalReport rep = cli::run_eval(ev);
    CHECK(rep.map == doctest::Approx(1.0).epsilon(1e-15));  // the one relevant item ranks first (tie on index)
    CHECK(rep.precision_at_radius[0] == doctest::Approx(0.5).epsilon(1e-15));

    ev.mode = "sideways";
    CHECK_THROWS_AS(cli::run_eval(ev), cli::UsageError);
}

TEST_CASE("embed layer 0 reproduces the normalized inputs") {
    TempDir dir;
    const auto csv = fixture_csv(dir);
    cli::RunConfig cfg = train_config(dir, csv);
    cli::run_train(cfg);

    cli::RunConfig emb = cfg;
    emb.weights_path = cfg.out_weights;
    emb.layer = 0;
    emb.out_embed = dir.file("e0.csv");
    cli::run_embed(emb);

    const LabeledDataset ds = cli::load_dataset(cfg);
    std::ifstream f(emb.out_embed);
    std::string line;
    std::size_t i = 0;
    while (std::getline(f, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::size_t r = 0;
        while (std::getline(ss, cell, ',')) {
            CHECK(std::stod(cell) == doctest::Approx(ds.x(r, i)).epsilon(1e-15));
            ++r;
        }
        CHECK(r == 3);
        ++i;
    }
    CHECK(i == 20);
}

TEST_CASE("embed at the top layer signs to the encoded bits") {
    TempDir dir;
    const auto csv = fixture_csv(dir);
    cli::RunConfig cfg = train_config(dir, csv);
    cli::run_train(cfg);

    cli::RunConfig emb = cfg;
    emb.weights_path = cfg.out_weights;
    emb.layer = 2;
    emb.out_embed = dir.file("eM.csv");
    cli::run_embed(emb);

    cli::RunConfig enc = cfg;
    enc.weights_path = cfg.out_weights;
    enc.out_codes = dir.file("c.bin");
    cli::run_encode(enc);
    const HashCodeMatrix codes = load_codes(enc.out_codes);

    std::ifstream f(emb.out_embed);
    std::string line;
    std::size_t i = 0;
    while (std::getline(f, line)) {
        std::stringstream ss(line);
        std::string cell;
        std::size_t k = 0;
        while (std::getline(ss, cell, ',')) {
            const int bit = std::stod(cell) > 0.0 ? 1 : -1;
            CHECK(bit == codes.get(i, k));
            ++k;
        }
        ++i;
    }
    CHECK(i == 20);

    emb.layer = 3;
    CHECK_THROWS_AS(cli::run_embed(emb), DimensionError);
}

TEST_CASE("identical train runs produce byte-identical outputs") {
    TempDir dir;
    const auto csv = fixture_csv(dir);
    cli::RunConfig cfg = train_config(dir, csv);
    cli::run_train(cfg);
    const std::string w1 = read_file(cfg.out_weights);
    const std::string d1 = read_file(cfg.out_diagnostics);

    cli::run_train(cfg);
    CHECK(read_file(cfg.out_weights) == w1);
    CHECK(read_file(cfg.out_diagnostics) == d1);
}

TEST_CASE("json config applies and flags override it") {
    TempDir dir;
    const auto csv = fixture_csv(dir);
    const std::string cfg_path = dir.file("run.json");
    write_file(cfg_path, std::string("{\n") + "  \"data_csv\": \"" + csv + "\",\n" +
                             "  \"label_columns\": 2,\n  \"dims\": [4, 4],\n" +
                             "  \"max_iterations\": 3,\n  \"convergence_rel_tol\": 0.0,\n" +
                             "  \"seed\": 5,\n  \"out_weights\": \"" + dir.file("w.bin") +
                             "\",\n  \"out_diagnostics\": \"" + dir.file("d.csv") + "\"\n}\n");

    cli::RunConfig cfg;
    cli::apply_json_config(cfg, cfg_path);
    CHECK(cfg.label_columns == 2);
    CHECK(cfg.dims == std::vector<std::size_t>{4, 4});
    CHECK(cfg.hyper.max_iterations == 3);
    CHECK(cfg.seed == 5);

    CHECK(run_binary("train --config " + cfg_path) == 0);
    std::string diag = read_file(dir.file("d.csv"));
    CHECK(std::count(diag.begin(), diag.end(), '\n') == 1 + 3 * 3);  // 3 iterations

    // the explicit flag wins over the file value
    CHECK(run_binary("train --config " + cfg_path + " --max-iterations 1") == 0);
    diag = read_file(dir.file("d.csv"));
    CHECK(std::count(diag.begin(), diag.end(), '\n') == 1 + 1 * 3);

    write_file(cfg_path, "{\"no_such_key\": 1}");
    cli::RunConfig bad;
    CHECK_THROWS_AS(cli::apply_json_config(bad, cfg_path), cli::UsageError);
    write_file(cfg_path, "not json");
    CHECK_THROWS_AS(cli::apply_json_config(bad, cfg_path), ParseError);
}
