#ifndef DTREG_CLI_HPP
#define DTREG_CLI_HPP

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dtreg/edt.hpp"
#include "dtreg/errors.hpp"
#include "dtreg/io.hpp"
#include "dtreg/metrics.hpp"
#include "dtreg/parallel.hpp"
#include "dtreg/pipeline.hpp"
#include "dtreg/synth.hpp"

namespace dtreg::cli {

namespace detail {

namespace fs = std::filesystem;

inline std::array<int, 3> parse_triple_int(const std::string& s) {
    std::array<int, 3> out{};
    const auto nums = io::detail::parse_numbers([&] {
        std::string t = s;
        std::replace(t.begin(), t.end(), ',', ' ');
        return t;
    }());
    if (nums.size() == 1) out = {static_cast<int>(nums[0]), static_cast<int>(nums[0]),
                                 static_cast<int>(nums[0])};
    else if (nums.size() == 3) out = {static_cast<int>(nums[0]), static_cast<int>(nums[1]),
                                      static_cast<int>(nums[2])};
    else throw DataError("expected 1 or 3 comma-separated integers: " + s);
    return out;
}

inline Vec3 parse_triple_double(const std::string& s) {
    const auto nums = io::detail::parse_numbers([&] {
        std::string t = s;
        std::replace(t.begin(), t.end(), ',', ' ');
        return t;
    }());
    if (nums.size() == 1) return {nums[0], nums[0], nums[0]};
    if (nums.size() == 3) return {nums[0], nums[1], nums[2]};
    throw DataError("expected 1 or 3 comma-separated numbers: " + s);
}

inline void require_parent_writable(const fs::path& p, const std::string& flag) {
    const fs::path parent = p.has_parent_path() ? p.parent_path() : fs::path(".");
    if (!fs::exists(parent))
        throw DataError(flag + ": directory does not exist: " + parent.string());
}

inline std::optional<double> parse_eps_flag(const std::string& s) {
    if (s == "auto") return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !(v > 0.0))
        throw DataError("--ngf-eps: expected a positive number or \"auto\", got \"" + s + "\"");
    return v;
}

struct CommonRegFlags {
    double alpha = 1.0;
    std::string eps = "auto";
    int levels = 3;
    int rigid_offset = 1;
    int max_iter = 100;
    int threads = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--alpha", alpha, "curvature weight of the deformable stage");
        cmd->add_option("--ngf-eps", eps, "NGF edge parameter, number or \"auto\"");
        cmd->add_option("--levels", levels, "deformable pyramid levels");
        cmd->add_option("--rigid-offset", rigid_offset, "rigid stage level offset");
        cmd->add_option("--max-iter", max_iter, "max solver iterations per level");
        cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
    }

    RegistrationConfig config() const {
        RegistrationConfig cfg;
        cfg.levels = levels;
        cfg.rigid_offset = rigid_offset;
        cfg.rigid_objective.eps = parse_eps_flag(eps);
        cfg.deformable_objective.alpha = alpha;
        cfg.deformable_objective.eps = cfg.rigid_objective.eps;
        cfg.deformable_solver.max_iter = max_iter;
        if (levels < 1) throw DataError("--levels must be >= 1");
        if (rigid_offset < 0) throw DataError("--rigid-offset must be >= 0");
        if (max_iter < 1) throw DataError("--max-iter must be >= 1");
        return cfg;
    }
};

inline nlohmann::json level_json(const LevelReport& rep) {
    return {{"level", rep.level},
            {"iterations", rep.solve.iterations},
            {"J_initial", rep.objective_initial},
            {"J_final", rep.objective_final},
            {"stop_reason", to_string(rep.solve.stop_reason)}};
}

inline nlohmann::json summary_json(const RegistrationResult& res) {
    nlohmann::json per_level = nlohmann::json::array();
    for (const LevelReport& rep : res.deformable_reports) per_level.push_back(level_json(rep));
    return {
        {"rigid_params",
         {{"angles_rad", {res.rigid.angles.x, res.rigid.angles.y, res.rigid.angles.z}},
          {"translation_mm",
           {res.rigid.translation.x, res.rigid.translation.y, res.rigid.translation.z}},
          {"center_mm", {res.rigid.center.x, res.rigid.center.y, res.rigid.center.z}},
          {"iterations", res.rigid_report.solve.iterations},
          {"J_initial", res.rigid_report.objective_initial},
          {"J_final", res.rigid_report.objective_final}}},
        {"per_level", per_level},
        {"seconds", res.seconds},
    };
}

inline std::string tre_text(const TREReport& r) {
    std::string out = "id\tdistance_mm\n";
    char buf[96];
    for (const auto& [id, d] : r.distances) {
        std::snprintf(buf, sizeof buf, "%s\t%.4f\n", id.c_str(), d);
        out += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "pairs %zu\nmean %.4f\nmin %.4f\nmax %.4f\nsd %.4f\n", r.pair_count(),
                  r.mean, r.min_d, r.max_d, r.sd);
    out += buf;
    if (!r.unmatched_fixed.empty() || !r.unmatched_moving.empty()) {
        std::snprintf(buf, sizeof buf, "unmatched_fixed %zu\nunmatched_moving %zu\n",
                      r.unmatched_fixed.size(), r.unmatched_moving.size());
        out += buf;
    }
    return out;
}

// one registration + landmark evaluation; shared by `eval`
struct CaseOutcome {
    CaseRow row;
    RegistrationResult reg;
};

inline CaseOutcome evaluate_case(const fs::path& dir, const RegistrationConfig& cfg) {
    const Volume3D tmpl = io::read_scalar_volume(dir / "before.mhd");
    const Volume3D reference = io::read_scalar_volume(dir / "after.mhd");
    const LandmarkSet before = io::read_landmarks(dir / "landmarks_before.csv");
    const LandmarkSet after = io::read_landmarks(dir / "landmarks_after.csv");

    CaseOutcome out;
    out.reg = register_volumes(tmpl, reference, cfg);
    const LandmarkSet mapped = warp_points(out.reg.field, after);
    out.row.label = dir.filename().string();
    out.row.before = tre(before, after);
    out.row.after = tre(before, mapped);
    out.row.landmarks = out.row.before.pair_count();
    return out;
}

} // namespace detail

// Entry point shared by the binary and the tests. Returns the process exit
// code: 0 success, 1 usage error, 2 data error, 3 numerical failure.
inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    namespace fs = std::filesystem;
    CLI::App app{"distance-map driven volume registration toolkit"};
    app.require_subcommand(1);

    // --- edt ---------------------------------------------------------------
    auto* c_edt = app.add_subcommand("edt", "distance transform of a binary mask");
    std::string edt_in, edt_out, edt_mode = "interior";
    int edt_threads = 0;
    c_edt->add_option("--in", edt_in, "input mask (.mhd, MET_UCHAR)")->required();
    c_edt->add_option("--out", edt_out, "output distance map (.mhd)")->required();
    c_edt->add_option("--mode", edt_mode, "interior | exterior | signed");
    c_edt->add_option("--threads", edt_threads, "worker threads (0 = hardware)");

    // --- register ----------------------------------------------------------
    auto* c_reg = app.add_subcommand("register", "two-stage registration of a volume pair");
    std::string reg_template, reg_reference, reg_init, reg_field, reg_warped, reg_rigid,
        reg_summary;
    detail::CommonRegFlags reg_flags;
    c_reg->add_option("--template", reg_template, "moving volume (.mhd)")->required();
    c_reg->add_option("--reference", reg_reference, "fixed volume (.mhd)")->required();
    c_reg->add_option("--init", reg_init, "initial 4x4 world transform (text)");
    c_reg->add_option("--out-field", reg_field, "output field base path (writes _ux/_uy/_uz)");
    c_reg->add_option("--out-warped", reg_warped, "output warped template (.mhd)");
    c_reg->add_option("--out-rigid", reg_rigid, "output rigid matrix (text)");
    c_reg->add_option("--summary", reg_summary, "write the JSON run summary here too");
    reg_flags.attach(c_reg);

    // --- warp-points ---------------------------------------------------------
    auto* c_warp = app.add_subcommand("warp-points", "apply a field to a landmark list");
    std::string wp_field, wp_points, wp_out;
    c_warp->add_option("--field", wp_field, "field base path (reads _ux/_uy/_uz)")->required();
    c_warp->add_option("--points", wp_points, "input landmarks (.csv)")->required();
    c_warp->add_option("--out", wp_out, "output landmarks (.csv)")->required();

    // --- tre ----------------------------------------------------------------
    auto* c_tre = app.add_subcommand("tre", "landmark target registration error");
    std::string tre_fixed, tre_moving, tre_out;
    c_tre->add_option("--fixed", tre_fixed, "fixed landmarks (.csv)")->required();
    c_tre->add_option("--moving", tre_moving, "moving landmarks (.csv)")->required();
    c_tre->add_option("--out", tre_out, "write the report here instead of stdout");

    // --- synth --------------------------------------------------------------
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic case");
    std::uint64_t synth_seed = 1;
    std::string synth_dims = "64", synth_spacing = "1", synth_out;
    double synth_mag = 4.0;
    c_synth->add_option("--seed", synth_seed, "case seed");
    c_synth->add_option("--dims", synth_dims, "voxels per axis, n or nx,ny,nz");
    c_synth->add_option("--spacing", synth_spacing, "mm per axis, s or sx,sy,sz");
    c_synth->add_option("--max-mag", synth_mag, "peak deformation magnitude (mm)");
    c_synth->add_option("--out", synth_out, "output case directory")->required();

    // --- eval ---------------------------------------------------------------
    auto* c_eval = app.add_subcommand("eval", "register case directories and report TRE");
    std::string eval_dir, eval_out;
    detail::CommonRegFlags eval_flags;
    c_eval->add_option("dir", eval_dir, "case directory, or a directory of cases")->required();
    c_eval->add_option("--out", eval_out, "write the report here instead of stdout");
    eval_flags.attach(c_eval);

    try {
        std::reverse(args.begin(), args.end());
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (app.got_subcommand(c_edt)) {
            dtreg::par::set_thread_count(edt_threads);
            detail::require_parent_writable(edt_out, "--out");
            EdtMode mode;
            if (edt_mode == "interior") mode = EdtMode::Interior;
            else if (edt_mode == "exterior") mode = EdtMode::Exterior;
            else if (edt_mode == "signed") mode = EdtMode::Signed;
            else throw DataError("--mode: expected interior, exterior or signed, got \"" +
                                 edt_mode + "\"");
            const Mask3D mask = io::read_mask(edt_in);
            const DistanceMap map = edt3(mask, mode);
            io::write_volume(map.volume, edt_out);
            out << "wrote " << edt_out << "\n";
            return 0;
        }

        if (app.got_subcommand(c_reg)) {
            dtreg::par::set_thread_count(reg_flags.threads);
            RegistrationConfig cfg = reg_flags.config();
            for (const auto& [path, flag] :
                 {std::pair{reg_field, "--out-field"}, {reg_warped, "--out-warped"},
                  {reg_rigid, "--out-rigid"}, {reg_summary, "--summary"}})
                if (!path.empty()) detail::require_parent_writable(path, flag);
            const Volume3D tmpl = io::read_scalar_volume(reg_template);
            const Volume3D reference = io::read_scalar_volume(reg_reference);
            if (!reg_init.empty()) cfg.initial = io::read_matrix(reg_init);

            const RegistrationResult res = register_volumes(tmpl, reference, cfg);

            if (!reg_field.empty()) io::write_field(res.field, reg_field);
            if (!reg_warped.empty()) io::write_volume(res.warped, reg_warped);
            if (!reg_rigid.empty()) io::write_matrix(rigid_to_matrix(res.rigid), reg_rigid);
            const std::string summary = detail::summary_json(res).dump(2) + "\n";
            if (!reg_summary.empty()) io::detail::write_file(reg_summary, summary);
            out << summary;
            return 0;
        }

        if (app.got_subcommand(c_warp)) {
            detail::require_parent_writable(wp_out, "--out");
            const VectorField3 field = io::read_field(wp_field);
            const LandmarkSet pts = io::read_landmarks(wp_points);
            std::vector<bool> outside;
            const LandmarkSet mapped = warp_points(field, pts, &outside);
            io::write_landmarks(mapped, wp_out);
            const auto flagged = std::count(outside.begin(), outside.end(), true);
            out << "warped " << mapped.entries.size() << " landmarks, " << flagged
                << " outside the field grid\n";
            return 0;
        }

        if (app.got_subcommand(c_tre)) {
            const LandmarkSet fixed = io::read_landmarks(tre_fixed);
            const LandmarkSet moving = io::read_landmarks(tre_moving);
            const std::string text = detail::tre_text(tre(fixed, moving));
            if (!tre_out.empty()) {
                detail::require_parent_writable(tre_out, "--out");
                io::detail::write_file(tre_out, text);
            } else {
                out << text;
            }
            return 0;
        }

        if (app.got_subcommand(c_synth)) {
            const auto dims = detail::parse_triple_int(synth_dims);
            const Vec3 spacing = detail::parse_triple_double(synth_spacing);
            fs::create_directories(synth_out);
            const synth::SynthCase sc = synth::make_case(synth_seed, dims, spacing, synth_mag);
            const fs::path dir(synth_out);
            io::write_volume(sc.before_map.volume, dir / "before.mhd");
            io::write_volume(sc.after_map.volume, dir / "after.mhd");
            io::write_field(sc.true_field, dir / "true_field");
            io::write_landmarks(sc.landmarks_before, dir / "landmarks_before.csv");
            io::write_landmarks(sc.landmarks_after, dir / "landmarks_after.csv");
            nlohmann::json meta{{"seed", sc.seed},
                                {"dims", {dims[0], dims[1], dims[2]}},
                                {"spacing", {spacing.x, spacing.y, spacing.z}},
                                {"max_mag", synth_mag},
                                {"landmarks", sc.landmarks_before.entries.size()}};
            io::detail::write_file(dir / "case.json", meta.dump(2) + "\n");
            out << "wrote case " << synth_seed << " to " << synth_out << "\n";
            return 0;
        }

        if (app.got_subcommand(c_eval)) {
            dtreg::par::set_thread_count(eval_flags.threads);
            const RegistrationConfig cfg = eval_flags.config();
            if (!fs::is_directory(eval_dir)) throw DataError("eval: not a directory: " + eval_dir);
            std::vector<fs::path> cases;
            if (fs::exists(fs::path(eval_dir) / "landmarks_before.csv")) {
                cases.push_back(eval_dir);
            } else {
                for (const auto& entry : fs::directory_iterator(eval_dir))
                    if (entry.is_directory() &&
                        fs::exists(entry.path() / "landmarks_before.csv"))
                        cases.push_back(entry.path());
                std::sort(cases.begin(), cases.end());
            }
            if (cases.empty()) throw DataError("eval: no cases found under " + eval_dir);
            std::vector<CaseRow> rows;
            for (const fs::path& dir : cases)
                rows.push_back(detail::evaluate_case(dir, cfg).row);
            const std::string report = format_report(rows);
            if (!eval_out.empty()) {
                detail::require_parent_writable(eval_out, "--out");
                io::detail::write_file(eval_out, report);
            } else {
                out << report;
            }
            return 0;
        }
    } catch (const NumericalError& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace dtreg::cli

#endif
