
version = '0.1.0'
git_version = 'None'
