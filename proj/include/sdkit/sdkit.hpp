#pragma once

#include "sdkit/calibrate.hpp"
#include "sdkit/cli.hpp"
#include "sdkit/engine.hpp"
#include "sdkit/experiment.hpp"
#include "sdkit/expression.hpp"
#include "sdkit/io.hpp"
#include "sdkit/lookup.hpp"
#include "sdkit/model.hpp"
#include "sdkit/parser.hpp"
#include "sdkit/svg.hpp"
#include "sdkit/tcell.hpp"
