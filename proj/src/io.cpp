#include "pktime/io.hpp"

#include "pktime/error.hpp"
#include "pktime/synth.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

namespace pktime {

namespace {

/// Rows of a CSV whose header must equal `columns`.
class CsvReader {
public:
	CsvReader(const std::string& path, std::vector<std::string> columns)
		: path_(path), in_(path), columns_(std::move(columns)) {
		if (!in_) {
			throw DataError(fmt::format("cannot read {}", path));
		}
		std::string header;
		if (!std::getline(in_, header)) {
			throw DataError(fmt::format("{}: missing header", path));
		}
		strip(header);
		if (split_csv_line(header) != columns_) {
			std::string want;
			for (const auto& c : columns_) {
				want += (want.empty() ? "" : ",") + c;
			}
			throw DataError(fmt::format("{}: header must be '{}'", path, want));
		}
	}

	bool next(std::vector<std::string>& fields) {
		std::string line;
		while (std::getline(in_, line)) {
			++line_no_;
			strip(line);
			if (line.empty()) {
				continue;
			}
			fields = split_csv_line(line);
			if (fields.size() != columns_.size()) {
				fail(fmt::format("expected {} fields, got {}", columns_.size(), fields.size()));
			}
			return true;
		}
		return false;
	}

	[[noreturn]] void fail(const std::string& why) const {
		throw DataError(fmt::format("{}:{}: {}", path_, line_no_ + 1, why));
	}

	Date date(const std::string& s) const {
		try {
			return parse_date(s);
		} catch (const DataError& e) {
			fail(e.what());
		}
	}

	double number(const std::string& s, const char* what) const {
		double v = 0.0;
		const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
		if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
			fail(fmt::format("{} '{}' is not a finite number", what, s));
		}
		return v;
	}

	std::int64_t integer(const std::string& s, const char* what) const {
		std::int64_t v = 0;
		const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
		if (ec != std::errc() || ptr != s.data() + s.size()) {
			fail(fmt::format("{} '{}' is not an integer", what, s));
		}
		return v;
	}

private:
	static void strip(std::string& s) {
		while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) {
			s.pop_back();
		}
	}

	std::string path_;
	std::ifstream in_;
	std::vector<std::string> columns_;
	std::size_t line_no_ = 0;
};

std::ofstream open_out(const std::string& path) {
	std::ofstream out(path);
	if (!out) {
		throw DataError(fmt::format("cannot write {}", path));
	}
	return out;
}

template <class Day>
void require_consecutive(const std::vector<Day>& days, const std::string& path) {
	for (std::size_t i = 1; i < days.size(); ++i) {
		if (days[i].date != add_days(days[i - 1].date, 1)) {
			throw DataError(fmt::format("{}: dates jump from {} to {}", path, format_date(days[i - 1].date),
			                            format_date(days[i].date)));
		}
	}
}

} // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
	std::vector<std::string> out(1);
	bool quoted = false;
	for (std::size_t i = 0; i < line.size(); ++i) {
		const char c = line[i];
		if (quoted) {
			if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
				out.back() += '"';
				++i;
			} else if (c == '"') {
				quoted = false;
			} else {
				out.back() += c;
			}
		} else if (c == '"') {
			quoted = true;
		} else if (c == ',') {
			out.emplace_back();
		} else {
			out.back() += c;
		}
	}
	return out;
}

std::string csv_field(const std::string& s) {
	if (s.find_first_of(",\"\n") == std::string::npos) {
		return s;
	}
	std::string out = "\"";
	for (char c : s) {
		out += c;
		if (c == '"') {
			out += '"';
		}
	}
	return out + "\"";
}

CtSeries read_ct_csv(const std::string& path) {
	CsvReader csv(path, {"date", "ct"});
	CtSeries series;
	std::vector<std::string> f;
	std::optional<Date> prev;
	while (csv.next(f)) {
		const Date d = csv.date(f[0]);
		if (prev && d != add_days(*prev, 1)) {
			csv.fail(fmt::format("dates jump from {} to {}", format_date(*prev), format_date(d)));
		}
		const std::int64_t ct = csv.integer(f[1], "ct");
		if (ct < 0) {
			csv.fail(fmt::format("ct {} is negative", ct));
		}
		if (!prev) {
			series.start = d;
		}
		series.values.push_back(static_cast<double>(ct));
		prev = d;
	}
	if (series.values.empty()) {
		throw DataError(fmt::format("{}: no rows", path));
	}
	return series;
}

CtSeries read_events_csv(const std::string& path, std::optional<DateRange> range) {
	CsvReader csv(path, {"timestamp", "direction"});
	EventLog log;
	std::vector<std::string> f;
	while (csv.next(f)) {
		Event e;
		e.date = csv.date(f[0]);
		if (f[1] == "in") {
			e.direction = Direction::gate_in;
		} else if (f[1] == "out") {
			e.direction = Direction::gate_out;
		} else {
			csv.fail(fmt::format("direction '{}' must be in or out", f[1]));
		}
		log.events.push_back(e);
	}
	if (log.events.empty()) {
		throw DataError(fmt::format("{}: no rows", path));
	}
	if (!range) {
		DateRange span{log.events.front().date, log.events.front().date};
		for (const Event& e : log.events) {
			span.first = std::min(span.first, e.date);
			span.last = std::max(span.last, e.date);
		}
		range = span;
	}
	return aggregate_daily(log, *range);
}

std::vector<BerthDay> read_berth_csv(const std::string& path) {
	CsvReader csv(path, {"date", "n_vessels", "import_teu", "export_teu"});
	std::vector<BerthDay> out;
	std::vector<std::string> f;
	while (csv.next(f)) {
		BerthDay b;
		b.date = csv.date(f[0]);
		b.n_vessels = static_cast<int>(csv.integer(f[1], "n_vessels"));
		b.import_teu = csv.integer(f[2], "import_teu");
		b.export_teu = csv.integer(f[3], "export_teu");
		try {
			validate(b);
		} catch (const DataError& e) {
			csv.fail(e.what());
		}
		out.push_back(b);
	}
	require_consecutive(out, path);
	return out;
}

std::vector<WeatherDay> read_weather_csv(const std::string& path) {
	CsvReader csv(path, {"date", "temp_c", "precip_mm", "wind_ms"});
	std::vector<WeatherDay> out;
	std::vector<std::string> f;
	while (csv.next(f)) {
		WeatherDay w;
		w.date = csv.date(f[0]);
		w.temperature = csv.number(f[1], "temp_c");
		w.precipitation = csv.number(f[2], "precip_mm");
		w.wind_speed = csv.number(f[3], "wind_ms");
		try {
			validate(w);
		} catch (const DataError& e) {
			csv.fail(e.what());
		}
		out.push_back(w);
	}
	require_consecutive(out, path);
	return out;
}

std::vector<CalendarDay> read_calendar_csv(const std::string& path) {
	CsvReader csv(path, {"date", "day_type", "holiday_name"});
	std::vector<CalendarDay> out;
	std::vector<std::string> f;
	while (csv.next(f)) {
		CalendarDay c;
		c.date = csv.date(f[0]);
		try {
			c.day_type = parse_day_type(f[1]);
		} catch (const std::exception& e) {
			csv.fail(e.what());
		}
		if (!f[2].empty()) {
			c.holiday_name = f[2];
		}
		try {
			validate(c);
		} catch (const DataError& e) {
			csv.fail(e.what());
		}
		out.push_back(std::move(c));
	}
	require_consecutive(out, path);
	return out;
}

std::vector<TatDay> read_tat_csv(const std::string& path) {
	CsvReader csv(path, {"date", "tat_min"});
	std::vector<TatDay> out;
	std::vector<std::string> f;
	while (csv.next(f)) {
		out.push_back({csv.date(f[0]), csv.number(f[1], "tat_min")});
	}
	return out;
}

void write_ct_csv(const CtSeries& series, const std::string& path) {
	std::ofstream out = open_out(path);
	out << "date,ct\n";
	for (std::size_t i = 0; i < series.size(); ++i) {
		out << format_date(series.date_at(i)) << ',' << format_number(series.values[i]) << '\n';
	}
}

void write_berth_csv(std::span<const BerthDay> days, const std::string& path) {
	std::ofstream out = open_out(path);
	out << "date,n_vessels,import_teu,export_teu\n";
	for (const BerthDay& b : days) {
		out << fmt::format("{},{},{},{}\n", format_date(b.date), b.n_vessels, b.import_teu, b.export_teu);
	}
}

void write_weather_csv(std::span<const WeatherDay> days, const std::string& path) {
	std::ofstream out = open_out(path);
	out << "date,temp_c,precip_mm,wind_ms\n";
	for (const WeatherDay& w : days) {
		out << fmt::format("{},{},{},{}\n", format_date(w.date), format_number(w.temperature),
		                   format_number(w.precipitation), format_number(w.wind_speed));
	}
}

void write_calendar_csv(std::span<const CalendarDay> days, const std::string& path) {
	std::ofstream out = open_out(path);
	out << "date,day_type,holiday_name\n";
	for (const CalendarDay& c : days) {
		out << fmt::format("{},{},{}\n", format_date(c.date), to_string(c.day_type),
		                   csv_field(c.holiday_name.value_or("")));
	}
}

void write_tat_csv(const CtSeries& series, std::span<const double> tat, const std::string& path) {
	if (tat.size() != series.size()) {
		throw ShapeError("write_tat_csv: one TAT value per series day is required");
	}
	std::ofstream out = open_out(path);
	out << "date,tat_min\n";
	for (std::size_t i = 0; i < tat.size(); ++i) {
		out << format_date(series.date_at(i)) << ',' << format_number(tat[i]) << '\n';
	}
}

void write_world(const World& world, const std::string& dir) {
	std::filesystem::create_directories(dir);
	const std::filesystem::path root(dir);
	write_ct_csv(world.ct, (root / "ct.csv").string());
	write_berth_csv(world.berth, (root / "berth.csv").string());
	write_weather_csv(world.weather, (root / "weather.csv").string());
	write_calendar_csv(world.calendar, (root / "calendar.csv").string());
	write_tat_csv(world.ct, world.tat, (root / "tat.csv").string());
}

ContextTable join_context(std::span<const BerthDay> berth, std::span<const WeatherDay> weather,
                          std::span<const CalendarDay> calendar) {
	std::map<Date, const WeatherDay*> w;
	std::map<Date, const CalendarDay*> c;
	for (const WeatherDay& d : weather) {
		w[d.date] = &d;
	}
	for (const CalendarDay& d : calendar) {
		c[d.date] = &d;
	}
	if (berth.size() != weather.size() || berth.size() != calendar.size()) {
		throw DataError(fmt::format("context feeds differ in length: berth {}, weather {}, calendar {}",
		                            berth.size(), weather.size(), calendar.size()));
	}
	ContextTable table;
	for (const BerthDay& b : berth) {
		const auto wi = w.find(b.date);
		const auto ci = c.find(b.date);
		if (wi == w.end() || ci == c.end()) {
			throw DataError(fmt::format("context for {} is missing from the {} feed", format_date(b.date),
			                            wi == w.end() ? "weather" : "calendar"));
		}
		table.add({*ci->second, b, *wi->second});
	}
	return table;
}

DataBundle load_bundle(const std::string& dir, const std::string& port) {
	const std::filesystem::path root(dir);
	if (!std::filesystem::is_directory(root)) {
		throw DataError(fmt::format("data directory {} does not exist", dir));
	}
	DataBundle bundle;
	if (std::filesystem::exists(root / "ct.csv")) {
		bundle.series = read_ct_csv((root / "ct.csv").string());
	} else if (std::filesystem::exists(root / "events.csv")) {
		bundle.series = read_events_csv((root / "events.csv").string());
	} else {
		throw DataError(fmt::format("{}: neither ct.csv nor events.csv found", dir));
	}
	const bool has_berth = std::filesystem::exists(root / "berth.csv");
	const bool has_weather = std::filesystem::exists(root / "weather.csv");
	const bool has_calendar = std::filesystem::exists(root / "calendar.csv");
	if (has_berth || has_weather || has_calendar) {
		if (!(has_berth && has_weather && has_calendar)) {
			throw DataError(
				fmt::format("{}: berth.csv, weather.csv and calendar.csv must be supplied together", dir));
		}
		bundle.context = join_context(read_berth_csv((root / "berth.csv").string()),
		                              read_weather_csv((root / "weather.csv").string()),
		                              read_calendar_csv((root / "calendar.csv").string()));
	}
	bundle.meta = PromptMeta{port, bundle.series.start, bundle.series.end()};
	return bundle;
}

} // namespace pktime
