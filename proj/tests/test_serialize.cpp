#include <doctest.h>

#include <sstream>

#include "mdra/serialize.hpp"

using namespace mdra;

TEST_CASE("UnitaryParams JSON: schema keys and exact round-trip") {
    Rng rng(1);
    const UnitaryParams p = build_unitary_params(5, 3, false, rng, false);
    const json j = to_json(p);
    CHECK(j.contains("L"));
    CHECK(j.contains("capacity"));
    CHECK(j.contains("fft_style"));
    CHECK(j.contains("cpx"));
    CHECK(j.contains("rotation_angles"));
    CHECK(j.contains("phase_angles"));
    CHECK(!j.contains("rotation_phases"));

    const UnitaryParams back = unitary_from_json(j);
    CHECK(back.rotation_angles == p.rotation_angles);  // bit-exact doubles
    CHECK(back.phase_angles == p.phase_angles);
    CHECK(back.L == p.L);
    CHECK(back.capacity == p.capacity);

    const UnitaryParams pc = build_unitary_params(4, 2, true, rng, true);
    const json jc = to_json(pc);
    CHECK(jc.contains("rotation_phases"));
    CHECK(unitary_from_json(jc).rotation_phases == pc.rotation_phases);
}

TEST_CASE("ModelParams JSON: version, shapes, exact round-trip") {
    Rng rng(2);
    const ModelParams m = init_model(3, 2, 2, 2, false, false, rng);
    const json j = to_json(m);
    CHECK(j.at("version") == 1);
    CHECK(j.at("L") == 3);
    CHECK(j.at("D") == 2);
    CHECK(j.at("K") == 2);
    CHECK(j.at("encoder").at("U").size() == 2 * 3 * 2);  // [re, im] pairs

    const ModelParams back = model_from_json(j);
    CHECK(flatten(back) == flatten(m));

    json broken = j;
    broken["version"] = 9;
    CHECK_THROWS_AS(model_from_json(broken), DataError);
}

TEST_CASE("VBState JSON round-trip") {
    VBState s;
    s.theta_bar = {1.5, 2.5};
    s.nu_bar = 33.0;
    s.lambda_bar = 0.75;
    s.R = Mat(3, 2);
    for (std::size_t i = 0; i < s.R.data.size(); ++i) s.R.data[i] = 0.1 * (double)i;
    const VBState back = vbstate_from_json(to_json(s));
    CHECK(back.theta_bar == s.theta_bar);
    CHECK(back.nu_bar == s.nu_bar);
    CHECK(back.lambda_bar == s.lambda_bar);
    CHECK(back.R.rows == 3);
    CHECK(back.R.cols == 2);
    CHECK(back.R.data == s.R.data);
}

TEST_CASE("TrainConfig JSON round-trip") {
    TrainConfig c;
    c.hyper = {1.0, 1.0, 0.01, 5};
    c.arch = {4, 8, true, false};
    c.optimizer.method = OptMethod::Sgd;
    c.optimizer.learning_rate = 0.05;
    c.vb_iters = 7;
    c.rng_seed = 99;
    const TrainConfig back = trainconfig_from_json(to_json(c));
    CHECK(back.hyper.K == 5);
    CHECK(back.optimizer.method == OptMethod::Sgd);
    CHECK(back.optimizer.learning_rate == 0.05);
    CHECK(back.vb_iters == 7);
    CHECK(back.rng_seed == 99);
    CHECK(to_json(back).dump() == to_json(c).dump());
}

TEST_CASE("dataset JSON lines: labels optional, exact values, errors") {
    Dataset ds;
    ds.push_back(TimeSeries(0, 2, {1.0, -2.5, 0.125, 3.0}, "A"));
    ds.push_back(TimeSeries(1, 2, {0.1, 0.2}, ""));

    std::stringstream ss;
    write_dataset_jsonl(ss, ds);
    const std::string text = ss.str();
    CHECK(text.find("\"label\":\"A\"") != std::string::npos);

    std::stringstream in(text);
    const Dataset back = read_dataset_jsonl(in);
    REQUIRE(back.size() == 2);
    CHECK(back[0].values == ds[0].values);
    CHECK(back[0].label == "A");
    CHECK(back[1].label.empty());
    CHECK(back[1].dim == 2);

    std::stringstream bad("{\"id\": 0, \"values\": [[1.0], [2.0, 3.0]]}\n");
    CHECK_THROWS_AS(read_dataset_jsonl(bad), DataError);
    std::stringstream garbage("not json\n");
    CHECK_THROWS_AS(read_dataset_jsonl(garbage), DataError);
}

TEST_CASE("checkpoint: dump/parse round-trip preserves every number") {
    Rng rng(3);
    Checkpoint c;
    c.trained.model = init_model(2, 1, 2, 2, true, false, rng);
    c.trained.vb.theta_bar = {2.0, 1.0};
    c.trained.vb.nu_bar = 17.0;
    c.trained.vb.lambda_bar = 0.3;
    c.trained.vb.R = Mat(2, 2, 0.5);
    c.trained.trace.push_back({1, 12.5, -3.25, {{0, 0.75}, {1, 0.25}}});
    c.config = TrainConfig{};

    const json j = to_json(c);
    const Checkpoint back = checkpoint_from_json(json::parse(j.dump()));
    CHECK(flatten(back.trained.model) == flatten(c.trained.model));
    CHECK(back.trained.vb.R.data == c.trained.vb.R.data);
    CHECK(back.trained.trace.size() == 1);
    CHECK(back.trained.trace[0].weighted_loss == 12.5);
    CHECK(back.trained.trace[0].masses[0].mass == 0.75);
    CHECK(to_json(back).dump() == j.dump());
}

TEST_CASE("CSV reader: header and timestamp column are skipped") {
    std::stringstream csv(
        "time,speed,accel\n"
        "0.0,1.5,-0.25\n"
        "0.1,2.5,0.75\n"
        "0.2,3.0,1.0\n");
    const Mat m = read_csv_signal(csv);
    CHECK(m.rows == 3);
    CHECK(m.cols == 2);
    CHECK(m(0, 0) == 1.5);
    CHECK(m(2, 1) == 1.0);

    std::stringstream ragged("t,a,b\n1,2,3\n1,2\n");
    CHECK_THROWS_AS(read_csv_signal(ragged), DataError);
    std::stringstream alpha("t,a\n0,xyz\n");
    CHECK_THROWS_AS(read_csv_signal(alpha), DataError);
    std::stringstream empty("");
    CHECK_THROWS_AS(read_csv_signal(empty), DataError);
}

TEST_CASE("TSV writers: headers and shapes") {
    std::stringstream trace;
    write_trace_tsv(trace, {{1, 2.0, -1.0, {{0, 0.9}, {1, 0.1}}}});
    CHECK(trace.str().find("iter\tweighted_loss\tfree_energy\tmasses") == 0);
    CHECK(trace.str().find("0:0.9;1:0.1") != std::string::npos);

    std::stringstream fbar;
    write_free_energy_tsv(fbar, {-1.0, -2.0});
    CHECK(fbar.str() == "iteration\tfree_energy\n0\t-1.0\n1\t-2.0\n");

    std::stringstream masses;
    write_masses_tsv(masses, {0.6, 0.4});
    CHECK(masses.str() == "cluster\tmass\n0\t0.6\n1\t0.4\n");

    Dataset ds = {TimeSeries(4, 1, {0.0}, "A"), TimeSeries(5, 1, {0.0}, "B")};
    Mat coords(2, 2);
    coords(0, 0) = 1.0;
    coords(0, 1) = 2.0;
    coords(1, 0) = -1.0;
    coords(1, 1) = -2.0;
    std::vector<std::size_t> assign = {0, 1};
    std::stringstream emb;
    write_embedding_tsv(emb, ds, coords, &assign);
    CHECK(emb.str().find("id\tx0\tx1\tassignment\tlabel") == 0);
    CHECK(emb.str().find("4\t1.0\t2.0\t0\tA") != std::string::npos);

    Mat c3(2, 3, 0.0);
    c3(0, 0) = 1.0;
    c3(1, 1) = 2.0;
    std::stringstream rgb;
    write_rgb_embedding_tsv(rgb, ds, c3);
    CHECK(rgb.str().find("id\tx\ty\tz\tr\tg\tb") == 0);
    // constant z axis maps to 0.5
    CHECK(rgb.str().find("\t0.5\n") != std::string::npos);
}
