#include "mdra/serialize.hpp"

#include <fstream>
#include <sstream>

namespace mdra {

namespace {

json cvec_to_json(const CVec& v) {
    json a = json::array();
    for (const cx& z : v) {
        a.push_back(z.real());
        a.push_back(z.imag());
    }
    return a;
}

CVec cvec_from_json(const json& a) {
    if (!a.is_array() || a.size() % 2 != 0) throw DataError("expected flat [re, im] array");
    CVec v(a.size() / 2);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = cx(a[2 * i].get<double>(), a[2 * i + 1].get<double>());
    return v;
}

json cell_to_json(const UnitaryParams& V, const CMat& U, const CVec& b,
                  const std::vector<double>& mb) {
    json j;
    j["V"] = to_json(V);
    j["U"] = cvec_to_json(U.data);
    j["b"] = cvec_to_json(b);
    j["modrelu_bias"] = mb;
    return j;
}

void cell_from_json(const json& j, std::size_t L, std::size_t D, UnitaryParams& V, CMat& U,
                    CVec& b, std::vector<double>& mb) {
    V = unitary_from_json(j.at("V"));
    U = CMat(L, D);
    U.data = cvec_from_json(j.at("U"));
    if (U.data.size() != L * D) throw DataError("cell U has wrong size");
    b = cvec_from_json(j.at("b"));
    if (b.size() != L) throw DataError("cell b has wrong size");
    mb = j.at("modrelu_bias").get<std::vector<double>>();
    if (mb.size() != L) throw DataError("cell modrelu_bias has wrong size");
}

}  // namespace

json to_json(const UnitaryParams& p) {
    json j;
    j["L"] = p.L;
    j["capacity"] = p.capacity;
    j["fft_style"] = p.fft_style;
    j["cpx"] = p.cpx;
    j["rotation_angles"] = p.rotation_angles;
    if (p.cpx) j["rotation_phases"] = p.rotation_phases;
    j["phase_angles"] = p.phase_angles;
    return j;
}

UnitaryParams unitary_from_json(const json& j) {
    UnitaryParams p;
    p.L = j.at("L").get<std::size_t>();
    p.capacity = j.at("capacity").get<std::size_t>();
    p.fft_style = j.at("fft_style").get<bool>();
    p.cpx = j.at("cpx").get<bool>();
    p.rotation_angles = j.at("rotation_angles").get<std::vector<double>>();
    if (p.cpx) p.rotation_phases = j.at("rotation_phases").get<std::vector<double>>();
    p.phase_angles = j.at("phase_angles").get<std::vector<double>>();
    if (p.rotation_angles.size() != p.capacity * (p.L / 2) || p.phase_angles.size() != p.L)
        throw DataError("UnitaryParams: inconsistent angle counts");
    return p;
}

json to_json(const ModelParams& m) {
    json j;
    j["version"] = 1;
    j["L"] = m.L;
    j["D"] = m.D;
    j["K"] = m.K();
    j["encoder"] = cell_to_json(m.encoder.V, m.encoder.U, m.encoder.b, m.encoder.modrelu_bias);
    json decs = json::array();
    for (const DecoderParams& d : m.decoders) {
        json jd = cell_to_json(d.V, d.U, d.b, d.modrelu_bias);
        jd["readout_weight"] = d.readout_w.data;
        jd["readout_bias"] = d.readout_b;
        decs.push_back(std::move(jd));
    }
    j["decoders"] = std::move(decs);
    return j;
}

ModelParams model_from_json(const json& j) {
    if (j.at("version").get<int>() != 1) throw DataError("unsupported model version");
    ModelParams m;
    m.L = j.at("L").get<std::size_t>();
    m.D = j.at("D").get<std::size_t>();
    cell_from_json(j.at("encoder"), m.L, m.D, m.encoder.V, m.encoder.U, m.encoder.b,
                   m.encoder.modrelu_bias);
    const json& decs = j.at("decoders");
    if (decs.size() != j.at("K").get<std::size_t>()) throw DataError("decoder count mismatch");
    m.decoders.resize(decs.size());
    for (std::size_t k = 0; k < decs.size(); ++k) {
        DecoderParams& d = m.decoders[k];
        cell_from_json(decs[k], m.L, m.D, d.V, d.U, d.b, d.modrelu_bias);
        d.readout_w = Mat(m.D, 2 * m.L);
        d.readout_w.data = decs[k].at("readout_weight").get<std::vector<double>>();
        if (d.readout_w.data.size() != m.D * 2 * m.L)
            throw DataError("readout_weight has wrong size");
        d.readout_b = decs[k].at("readout_bias").get<std::vector<double>>();
        if (d.readout_b.size() != m.D) throw DataError("readout_bias has wrong size");
    }
    return m;
}

json to_json(const VBState& s) {
    json j;
    j["theta_bar"] = s.theta_bar;
    j["nu_bar"] = s.nu_bar;
    j["lambda_bar"] = s.lambda_bar;
    j["R"] = s.R.data;
    j["N"] = s.R.rows;
    j["K"] = s.R.cols;
    return j;
}

VBState vbstate_from_json(const json& j) {
    VBState s;
    s.theta_bar = j.at("theta_bar").get<std::vector<double>>();
    s.nu_bar = j.at("nu_bar").get<double>();
    s.lambda_bar = j.at("lambda_bar").get<double>();
    const std::size_t N = j.at("N").get<std::size_t>();
    const std::size_t K = j.at("K").get<std::size_t>();
    s.R = Mat(N, K);
    s.R.data = j.at("R").get<std::vector<double>>();
    if (s.R.data.size() != N * K) throw DataError("VBState: R has wrong size");
    return s;
}

json to_json(const TrainConfig& c) {
    json j;
    j["hyper"] = {{"theta0", c.hyper.theta0},
                  {"nu0", c.hyper.nu0},
                  {"lambda0", c.hyper.lambda0},
                  {"K", c.hyper.K}};
    j["arch"] = {{"L", c.arch.L},
                 {"capacity", c.arch.capacity},
                 {"fft_style", c.arch.fft_style},
                 {"cpx", c.arch.cpx}};
    j["optimizer"] = {{"method", c.optimizer.method == OptMethod::Adam ? "adam" : "sgd"},
                      {"learning_rate", c.optimizer.learning_rate},
                      {"epochs_per_outer", c.optimizer.epochs_per_outer},
                      {"batch_size", c.optimizer.batch_size}};
    j["vb_iters"] = c.vb_iters;
    j["free_energy_threshold"] = c.free_energy_threshold;
    j["max_outer_iters"] = c.max_outer_iters;
    j["rng_seed"] = c.rng_seed;
    j["threads"] = c.threads;
    return j;
}

TrainConfig trainconfig_from_json(const json& j) {
    TrainConfig c;
    const json& h = j.at("hyper");
    c.hyper.theta0 = h.at("theta0").get<double>();
    c.hyper.nu0 = h.at("nu0").get<double>();
    c.hyper.lambda0 = h.at("lambda0").get<double>();
    c.hyper.K = h.at("K").get<std::size_t>();
    const json& a = j.at("arch");
    c.arch.L = a.at("L").get<std::size_t>();
    c.arch.capacity = a.at("capacity").get<std::size_t>();
    c.arch.fft_style = a.at("fft_style").get<bool>();
    c.arch.cpx = a.at("cpx").get<bool>();
    const json& o = j.at("optimizer");
    const std::string method = o.at("method").get<std::string>();
    if (method == "adam")
        c.optimizer.method = OptMethod::Adam;
    else if (method == "sgd")
        c.optimizer.method = OptMethod::Sgd;
    else
        throw DataError("unknown optimizer method: " + method);
    c.optimizer.learning_rate = o.at("learning_rate").get<double>();
    c.optimizer.epochs_per_outer = o.at("epochs_per_outer").get<std::size_t>();
    c.optimizer.batch_size = o.at("batch_size").get<std::size_t>();
    c.vb_iters = j.at("vb_iters").get<std::size_t>();
    c.free_energy_threshold = j.at("free_energy_threshold").get<double>();
    c.max_outer_iters = j.at("max_outer_iters").get<std::size_t>();
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    c.threads = j.at("threads").get<unsigned>();
    return c;
}

json to_json(const ClusterReport& r) {
    json j;
    j["assignments"] = r.assignments;
    j["masses"] = r.masses;
    if (r.purity) j["purity"] = *r.purity;
    if (r.embedding) {
        json rows = json::array();
        for (std::size_t i = 0; i < r.embedding->rows; ++i) {
            json row = json::array();
            for (std::size_t c = 0; c < r.embedding->cols; ++c)
                row.push_back((*r.embedding)(i, c));
            rows.push_back(std::move(row));
        }
        j["embedding"] = std::move(rows);
    }
    return j;
}

json to_json(const Checkpoint& c) {
    json j;
    j["version"] = 1;
    j["model"] = to_json(c.trained.model);
    j["vb"] = to_json(c.trained.vb);
    j["config"] = to_json(c.config);
    json trace = json::array();
    for (const TraceRow& row : c.trained.trace) {
        json masses = json::array();
        for (const ClusterMass& m : row.masses) masses.push_back({m.index, m.mass});
        trace.push_back({{"iter", row.iter},
                         {"weighted_loss", row.weighted_loss},
                         {"free_energy", row.free_energy},
                         {"masses", std::move(masses)}});
    }
    j["trace"] = std::move(trace);
    return j;
}

Checkpoint checkpoint_from_json(const json& j) {
    if (j.at("version").get<int>() != 1) throw DataError("unsupported checkpoint version");
    Checkpoint c;
    c.trained.model = model_from_json(j.at("model"));
    c.trained.vb = vbstate_from_json(j.at("vb"));
    c.config = trainconfig_from_json(j.at("config"));
    for (const json& row : j.at("trace")) {
        TraceRow r;
        r.iter = row.at("iter").get<std::size_t>();
        r.weighted_loss = row.at("weighted_loss").get<double>();
        r.free_energy = row.at("free_energy").get<double>();
        for (const json& m : row.at("masses"))
            r.masses.push_back({m[0].get<std::size_t>(), m[1].get<double>()});
        c.trained.trace.push_back(std::move(r));
    }
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    os << to_json(c).dump() << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read " + path.string());
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw DataError("bad checkpoint JSON in " + path.string() + ": " + e.what());
    }
    try {
        return checkpoint_from_json(j);
    } catch (const json::exception& e) {
        throw DataError("bad checkpoint in " + path.string() + ": " + e.what());
    }
}

void write_dataset_jsonl(std::ostream& os, const Dataset& ds) {
    for (const TimeSeries& ts : ds) {
        json j;
        j["id"] = ts.id;
        if (!ts.label.empty()) j["label"] = ts.label;
        json values = json::array();
        for (std::size_t t = 0; t < ts.length(); ++t) {
            json frame = json::array();
            for (std::size_t d = 0; d < ts.dim; ++d) frame.push_back(ts.at(t, d));
            values.push_back(std::move(frame));
        }
        j["values"] = std::move(values);
        os << j.dump() << "\n";
    }
}

Dataset read_dataset_jsonl(std::istream& is) {
    Dataset ds;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("bad JSON on dataset line " + std::to_string(lineno) + ": " +
                            e.what());
        }
        TimeSeries ts;
        ts.id = j.at("id").get<int>();
        if (j.contains("label")) ts.label = j.at("label").get<std::string>();
        const json& values = j.at("values");
        if (values.empty()) throw DataError("empty signal on line " + std::to_string(lineno));
        ts.dim = values[0].size();
        if (ts.dim == 0) throw DataError("zero-dimensional frame on line " + std::to_string(lineno));
        ts.values.reserve(values.size() * ts.dim);
        for (const json& frame : values) {
            if (frame.size() != ts.dim)
                throw DataError("ragged frames on line " + std::to_string(lineno));
            for (const json& v : frame) ts.values.push_back(v.get<double>());
        }
        if (!all_finite(ts.values))
            throw DataError("non-finite value on line " + std::to_string(lineno));
        ds.push_back(std::move(ts));
    }
    return ds;
}

void save_dataset_jsonl(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    write_dataset_jsonl(os, ds);
}

Dataset load_dataset_jsonl(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read " + path.string());
    return read_dataset_jsonl(is);
}

namespace {

// Shortest round-trip decimal form, matching the JSON encoder.
std::string fmt(double v) { return json(v).dump(); }

}  // namespace

void write_trace_tsv(std::ostream& os, const std::vector<TraceRow>& trace) {
    os << "iter\tweighted_loss\tfree_energy\tmasses\n";
    for (const TraceRow& row : trace) {
        os << row.iter << "\t" << fmt(row.weighted_loss) << "\t" << fmt(row.free_energy) << "\t";
        for (std::size_t i = 0; i < row.masses.size(); ++i) {
            if (i) os << ";";
            os << row.masses[i].index << ":" << fmt(row.masses[i].mass);
        }
        os << "\n";
    }
}

void write_free_energy_tsv(std::ostream& os, const std::vector<double>& fbar) {
    os << "iteration\tfree_energy\n";
    for (std::size_t i = 0; i < fbar.size(); ++i) os << i << "\t" << fmt(fbar[i]) << "\n";
}

void write_masses_tsv(std::ostream& os, const std::vector<double>& masses) {
    os << "cluster\tmass\n";
    for (std::size_t k = 0; k < masses.size(); ++k) os << k << "\t" << fmt(masses[k]) << "\n";
}

void write_embedding_tsv(std::ostream& os, const Dataset& ds, const Mat& coords,
                         const std::vector<std::size_t>* assignments) {
    const bool labeled = !ds.empty() && !ds.front().label.empty();
    os << "id";
    for (std::size_t c = 0; c < coords.cols; ++c) os << "\tx" << c;
    if (assignments) os << "\tassignment";
    if (labeled) os << "\tlabel";
    os << "\n";
    for (std::size_t i = 0; i < coords.rows; ++i) {
        os << ds[i].id;
        for (std::size_t c = 0; c < coords.cols; ++c) os << "\t" << fmt(coords(i, c));
        if (assignments) os << "\t" << (*assignments)[i];
        if (labeled) os << "\t" << ds[i].label;
        os << "\n";
    }
}

void write_rgb_embedding_tsv(std::ostream& os, const Dataset& ds, const Mat& coords) {
    if (coords.cols != 3) throw ShapeError("write_rgb_embedding_tsv: need 3-D coordinates");
    // Min-max scale each axis to [0, 1]; constant axes map to 0.5.
    std::vector<double> lo(3, 0.0), hi(3, 0.0);
    for (std::size_t c = 0; c < 3; ++c) {
        lo[c] = hi[c] = coords.rows ? coords(0, c) : 0.0;
        for (std::size_t i = 1; i < coords.rows; ++i) {
            lo[c] = std::min(lo[c], coords(i, c));
            hi[c] = std::max(hi[c], coords(i, c));
        }
    }
    os << "id\tx\ty\tz\tr\tg\tb\n";
    for (std::size_t i = 0; i < coords.rows; ++i) {
        os << ds[i].id;
        for (std::size_t c = 0; c < 3; ++c) os << "\t" << fmt(coords(i, c));
        for (std::size_t c = 0; c < 3; ++c) {
            const double span = hi[c] - lo[c];
            const double v = span > 0.0 ? (coords(i, c) - lo[c]) / span : 0.5;
            os << "\t" << fmt(v);
        }
        os << "\n";
    }
}

Mat read_csv_signal(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("CSV is empty");
    std::vector<std::vector<double>> rows;
    std::size_t channels = 0;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool first = true;
        while (std::getline(ss, cell, ',')) {
            if (first) {  // timestamp column, ignored
                first = false;
                continue;
            }
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw DataError("bad number '" + cell + "' on CSV line " + std::to_string(lineno));
            }
        }
        if (row.empty()) throw DataError("no channels on CSV line " + std::to_string(lineno));
        if (channels == 0)
            channels = row.size();
        else if (row.size() != channels)
            throw DataError("ragged CSV row on line " + std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("CSV has a header but no data rows");
    Mat m(rows.size(), channels);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < channels; ++j) m(i, j) = rows[i][j];
    return m;
}

Mat load_csv_signal(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read " + path.string());
    return read_csv_signal(is);
}

}  // namespace mdra
