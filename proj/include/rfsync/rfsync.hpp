#pragma once

#include "rfsync/units.hpp"
#include "rfsync/units_parse.hpp"
#include "rfsync/rng.hpp"
#include "rfsync/bargraph_codec.hpp"
#include "rfsync/radio_channel.hpp"
#include "rfsync/flooding.hpp"
#include "rfsync/clock_sync.hpp"
#include "rfsync/event_queue.hpp"
#include "rfsync/delay_protocol.hpp"
#include "rfsync/scenario.hpp"
#include "rfsync/scenario_file.hpp"
#include "rfsync/metrics.hpp"
#include "rfsync/engine.hpp"
#include "rfsync/report.hpp"
