#include "reem/errors.hpp"
#include "reem/mpc.hpp"
#include "reem/timeutil.hpp"

#include "text_util.hpp"

namespace reem::mpc {

void write_closed_loop_csv(const ClosedLoopResult& result, const std::filesystem::path& path) {
  using detail::format_double;
  auto out = detail::open_for_write(path);
  out << kClosedLoopCsvHeader << '\n';
  for (const auto& r : result.rows) {
    out << format_iso8601(r.timestamp) << ',' << format_double(r.t_room) << ',' << format_double(r.u) << ','
        << format_double(r.terms.comfort) << ',' << format_double(r.terms.consume) << ','
        << format_double(r.terms.penalty) << ',' << format_double(r.energy_kwh_cum) << '\n';
  }
}

std::vector<ClosedLoopRow> read_closed_loop_csv(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::string line;
  if (!std::getline(in, line) || line != kClosedLoopCsvHeader) {
    throw ContractViolation("closed-loop csv " + path.string() + ": unexpected header");
  }
  std::vector<ClosedLoopRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 7) throw ContractViolation("closed-loop csv " + path.string() + ": expected 7 fields");
    const std::string ctx = "closed-loop csv " + path.string();
    ClosedLoopRow r;
    r.timestamp = parse_iso8601(f[0]);
    r.t_room = detail::parse_double(f[1], ctx);
    r.u = detail::parse_double(f[2], ctx);
    r.terms.comfort = detail::parse_double(f[3], ctx);
    r.terms.consume = detail::parse_double(f[4], ctx);
    r.terms.penalty = detail::parse_double(f[5], ctx);
    r.energy_kwh_cum = detail::parse_double(f[6], ctx);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace reem::mpc
