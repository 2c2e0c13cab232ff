#include "reem/ensemble.hpp"
#include "reem/errors.hpp"
#include "reem/timeutil.hpp"

#include "text_util.hpp"

#include <string>

namespace reem::ensemble {

namespace {

// The weights field is a JSON array and therefore quoted; no other field
// may contain a comma or quote.
std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted) throw ContractViolation("record csv: unbalanced quote");
  return fields;
}

}  // namespace

void write_records_csv(const std::vector<EnsembleRecord>& records, const std::filesystem::path& path) {
  using detail::format_double;
  auto out = detail::open_for_write(path);
  out << kRecordCsvHeader << '\n';
  for (const auto& r : records) {
    if (r.room.find_first_of(",\"") != std::string::npos) {
      throw ContractViolation("record csv: room id '" + r.room + "' contains a comma or quote");
    }
    std::string bits, weights = "[";
    for (int v : r.b) bits += v ? '1' : '0';
    for (std::size_t i = 0; i < r.w.size(); ++i) weights += (i ? "," : "") + format_double(r.w[i]);
    weights += ']';
    out << format_iso8601(r.timestamp) << ',' << r.room << ',' << bits << ",\"" << weights << "\","
        << format_double(r.yhat) << ',' << format_double(r.ytrue) << ',' << format_double(r.sq_err) << '\n';
  }
}

std::vector<EnsembleRecord> read_records_csv(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::string line;
  if (!std::getline(in, line) || line != kRecordCsvHeader) {
    throw ContractViolation("record csv " + path.string() + ": unexpected header");
  }
  std::vector<EnsembleRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string ctx = path.string() + ":" + std::to_string(line_no);
    const auto f = split_record(line);
    if (f.size() != 7) throw ContractViolation(ctx + ": expected 7 fields");
    EnsembleRecord r;
    r.timestamp = parse_iso8601(f[0]);
    r.room = f[1];
    for (char ch : f[2]) {
      if (ch != '0' && ch != '1') throw ContractViolation(ctx + ": bad selection bitstring");
      r.b.push_back(ch == '1');
    }
    const std::string& wj = f[3];
    if (wj.size() < 2 || wj.front() != '[' || wj.back() != ']') throw ContractViolation(ctx + ": bad weights");
    for (auto part : detail::split(std::string_view(wj).substr(1, wj.size() - 2), ',')) {
      r.w.push_back(detail::parse_double(part, ctx));
    }
    if (r.w.size() != r.b.size()) throw ContractViolation(ctx + ": weights and selection lengths differ");
    r.yhat = detail::parse_double(f[4], ctx);
    r.ytrue = detail::parse_double(f[5], ctx);
    r.sq_err = detail::parse_double(f[6], ctx);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace reem::ensemble
