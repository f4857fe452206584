#include "bevloop/loop/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "bevloop/common/error.hpp"

namespace bevloop::loop {

using nlohmann::json;

namespace {

json load_manifest(const std::string& run_dir) {
    const std::string path = run_dir + "/manifest.json";
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path);
    json j = json::parse(is, nullptr, false);
    if (j.is_discarded()) throw ParseError("manifest is not valid JSON", 0);
    if (j.value("schema", "") != "bevloop.run")
        throw ParseError("not a run manifest: " + path, 0);
    return j;
}

struct Row {
    std::string name;
    double train_failures = 0.0;
    double val_collision = 0.0;
    double l2 = 0.0;
    double dd = -1.0;  // negative = not measured
    double reqs = 0.0;
    double gen = 0.0;
    double bank = 0.0;
};

std::vector<Row> rows_of(const json& m) {
    std::vector<Row> rows;
    auto push = [&](const json& it, const std::string& name) {
        Row r;
        r.name = name;
        r.train_failures = it.value("train_failures", 0.0);
        r.val_collision = it.value("val_collision_rate", 0.0);
        r.l2 = it.value("val_l2_avg", 0.0);
        if (it.contains("dd")) r.dd = it["dd"].get<double>();
        r.reqs = it.value("n_requirements", 0.0);
        r.gen = it.value("n_generated", 0.0);
        r.bank = it.value("bank_size", 0.0);
        rows.push_back(r);
    };
    for (const auto& it : m.value("iterations", json::array()))
        push(it, "iter " + std::to_string(it.value("iteration", 0)));
    if (m.contains("final")) push(m["final"], "final");
    return rows;
}

std::string fmt(double v, int prec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

}  // namespace

std::string render_report_text(const std::string& run_dir) {
    const json m = load_manifest(run_dir);
    const std::vector<Row> rows = rows_of(m);
    std::ostringstream os;
    const json& cfg = m.value("config", json::object());
    os << "run: " << run_dir << "\n";
    os << "seed " << cfg.value("seed", 0) << ", baseline " << cfg.value("baseline", "none")
       << ", analyzer " << cfg.value("analyzer", "mock") << ", budget "
       << cfg.value("budget", 0) << "/iter\n\n";
    os << "phase    failures  val-collision  l2-avg     dd    reqs   new  bank\n";
    os << "-------  --------  -------------  ------  -----  -----  ----  ----\n";
    for (const Row& r : rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%-7s  %8.0f  %13s  %6s  %5s  %5.0f  %4.0f  %4.0f\n",
                      r.name.c_str(), r.train_failures, fmt(r.val_collision, 4).c_str(),
                      fmt(r.l2, 3).c_str(), r.dd < 0.0 ? "-" : fmt(r.dd, 3).c_str(), r.reqs,
                      r.gen, r.bank);
        os << line;
    }
    if (m.contains("val_collision_initial")) {
        const double a = m["val_collision_initial"].get<double>();
        const double b = m["val_collision_final"].get<double>();
        os << "\nheld-out collision rate " << fmt(a, 4) << " -> " << fmt(b, 4);
        if (a > 0.0)
            os << "  (" << fmt(100.0 * (b - a) / a, 1) << "% relative)";
        os << "\n";
    }
    if (m.value("terminated_early", false))
        os << "loop stopped early: the training split ran out of failures\n";
    return os.str();
}

std::string render_report_svg(const std::string& run_dir) {
    const json m = load_manifest(run_dir);
    const std::vector<Row> rows = rows_of(m);
    const int W = 720, H = 360, L = 70, R = 30, T = 40, B = 60;
    const int pw = W - L - R, ph = H - T - B;
    double max_coll = 0.0, max_fail = 1.0;
    for (const Row& r : rows) {
        max_coll = std::max(max_coll, r.val_collision);
        max_fail = std::max(max_fail, r.train_failures);
    }
    if (max_coll <= 0.0) max_coll = 1.0;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"#ffffff\"/>\n";
    os << "<text x=\"" << L << "\" y=\"24\" font-family=\"monospace\" font-size=\"15\">"
       << "held-out collision rate (bars) and mined failures (line)</text>\n";
    const size_t n = rows.size();
    const double slot = n ? double(pw) / double(n) : double(pw);
    // Bars: collision rate.
    for (size_t i = 0; i < n; ++i) {
        const double h = ph * rows[i].val_collision / max_coll;
        const double x = L + slot * double(i) + slot * 0.15;
        const double y = T + (ph - h);
        os << "<rect x=\"" << fmt(x, 1) << "\" y=\"" << fmt(y, 1) << "\" width=\""
           << fmt(slot * 0.5, 1) << "\" height=\"" << fmt(h, 1)
           << "\" fill=\"#4878a8\"/>\n";
        os << "<text x=\"" << fmt(x, 1) << "\" y=\"" << H - B + 18
           << "\" font-family=\"monospace\" font-size=\"12\">" << rows[i].name << "</text>\n";
        os << "<text x=\"" << fmt(x, 1) << "\" y=\"" << fmt(y - 4.0, 1)
           << "\" font-family=\"monospace\" font-size=\"11\">" << fmt(rows[i].val_collision, 3)
           << "</text>\n";
    }
    // Line: mined failures, scaled to its own max.
    os << "<polyline fill=\"none\" stroke=\"#b05050\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < n; ++i) {
        const double x = L + slot * (double(i) + 0.4);
        const double y = T + ph * (1.0 - rows[i].train_failures / max_fail);
        os << fmt(x, 1) << "," << fmt(y, 1) << (i + 1 < n ? " " : "");
    }
    os << "\"/>\n";
    os << "<text x=\"" << W - R - 170 << "\" y=\"" << T - 6
       << "\" font-family=\"monospace\" font-size=\"12\" fill=\"#b05050\">max failures = "
       << fmt(max_fail, 0) << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw << "\" y2=\""
       << T + ph << "\" stroke=\"#000000\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph
       << "\" stroke=\"#000000\"/>\n";
    os << "<text x=\"8\" y=\"" << T + 12 << "\" font-family=\"monospace\" font-size=\"11\">"
       << fmt(max_coll, 3) << "</text>\n";
    os << "<text x=\"8\" y=\"" << T + ph << "\" font-family=\"monospace\" font-size=\"11\">"
       << "0</text>\n";
    os << "</svg>\n";
    return os.str();
}

std::string write_report(const std::string& run_dir) {
    const std::string text = render_report_text(run_dir);
    const std::string svg = render_report_svg(run_dir);
    for (const auto& [name, body] :
         {std::pair<std::string, const std::string&>{"report.txt", text},
          std::pair<std::string, const std::string&>{"report.svg", svg}}) {
        std::ofstream os(run_dir + "/" + name, std::ios::trunc);
        if (!os) throw IoError("cannot write " + run_dir + "/" + name);
        os << body;
        if (!os) throw IoError("failed writing " + run_dir + "/" + name);
    }
    return text;
}

}  // namespace bevloop::loop
