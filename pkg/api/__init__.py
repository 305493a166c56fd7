# API module

