"""
    helper.py
    ---------
    Implements various helper functions, e.g. to format exception details and to display
    error and information messages on the command line.
"""

import io
import sys
import traceback


class CrossFieldError(Exception):
    """Base class of all errors raised by the cross field modules."""


def exception_message(exc_type, exc_value, tracebackobj):
    """Return a detailed error message with the exception details.

    @param exc_type exception type
    @param exc_value exception value
    @param tracebackobj traceback object
    """

    separator = '-' * 40
    notice = "An unhandled exception has occurred!\n"

    tbinfofile = io.StringIO()
    traceback.print_tb(tracebackobj, None, tbinfofile)
    tbinfofile.seek(0)
    tbinfo = tbinfofile.read()
    errmsg = '%s: \n%s' % (exc_type.__name__, str(exc_value))
    sections = [notice, separator, errmsg, separator, tbinfo]

    return '\n'.join(sections)


def show_error(message):
    """Display "message" as an error on stderr."""

    print("Error: " + message, file=sys.stderr)


def show_notification(message):
    """Display "message" as a note on stdout."""

    print(message)


def excepthook(exc_type, exc_value, tracebackobj):
    """Replacement for sys.excepthook, prints unhandled exceptions with their traceback."""

    show_error(exception_message(exc_type, exc_value, tracebackobj))
